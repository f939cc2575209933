use std::time::Instant;

use super::config::{ExperimentConfig, SchedulerKind};
use super::summary::{summarize, ActionSpace, RunSummary};
use crate::cqpoints::CqPointSet;
use crate::dynamics::{transmit_with, Delivery, World, WorldState};
use crate::estimator::{Cqkf, FilterState, Propagator};
use crate::numerics::{GaussianSampler, RngStream, StreamId};
use crate::queries::{
    mse_from_sampler, respond_with, reward, ClientOutcome, ClientProcess, IdleReward, QueryValue,
};
use crate::schedulers::{
    benchmark_observation, proposed_observation, DqnScheduler, MonteCarloScheduler, QueryingClient,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ClientRecord {
    pub queried: bool,
    pub mse: Option<f64>,
    pub z_true: Option<QueryValue>,
    pub z_hat: Option<QueryValue>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub t: usize,
    pub action: usize,
    pub transmitted: bool,
    pub erased: bool,
    pub reward: f64,
    pub trace_pri: f64,
    pub trace_pos: f64,
    pub clients: Vec<ClientRecord>,
    /// Inside the warm-up window, excluded from summaries.
    pub warmup: bool,
}

#[derive(Debug, Clone)]
enum Policy {
    Dqn(Box<DqnScheduler>),
    MonteCarlo(MonteCarloScheduler),
}

/// One simulation: ground truth, edge filter, clients and scheduler.
#[derive(Debug, Clone)]
pub struct Experiment {
    cfg: ExperimentConfig,
    seed: u64,
    world: World,
    filter: Cqkf,
    clients: Vec<ClientProcess>,
    policy: Policy,
    truth: WorldState,
    fs: FilterState,
    dynamics: RngStream,
    measurement: RngStream,
    channel: RngStream,
    chains: RngStream,
    mse: RngStream,
    respond: RngStream,
}

impl Experiment {
    pub fn new(cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let world = World::new(cfg.world.build()?)?;
        let wc = &world.cfg;
        let (w, s) = cfg.smoothing();
        let filter = Cqkf {
            points: CqPointSet::generate(wc.m, cfg.nprime)?,
            process_noise: wc.process_noise.clone(),
            measurement_noise: wc.measurement_noise.clone(),
            h: wc.h.clone(),
            propagator: Propagator::Holt,
            options: cfg.filter_options(),
        };
        let clients = cfg.build_clients()?;
        let c = clients.len();
        let policy = match cfg.scheduler {
            SchedulerKind::Proposed => Policy::Dqn(Box::new(DqnScheduler::proposed(wc.n, c, cfg.dqn_params(), seed)?)),
            SchedulerKind::BenchmarkDrl => {
                Policy::Dqn(Box::new(DqnScheduler::benchmark(wc.m, wc.n, c, cfg.dqn_params(), seed)?))
            }
            SchedulerKind::Montecarlo => Policy::MonteCarlo(MonteCarloScheduler::new(cfg.samples, seed)),
        };
        let truth = WorldState::initial(wc);
        let fs = FilterState::initial(wc.m, w, s);
        Ok(Self {
            cfg: cfg.clone(),
            seed,
            world,
            filter,
            clients,
            policy,
            truth,
            fs,
            dynamics: RngStream::new(seed, StreamId::Dynamics),
            measurement: RngStream::new(seed, StreamId::Measurement),
            channel: RngStream::new(seed, StreamId::Channel),
            chains: RngStream::new(seed, StreamId::Clients),
            mse: RngStream::new(seed, StreamId::MseSampling),
            respond: RngStream::new(seed, StreamId::Respond),
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn t(&self) -> usize {
        self.truth.t
    }

    pub fn truth(&self) -> &WorldState {
        &self.truth
    }

    pub fn filter_state(&self) -> &FilterState {
        &self.fs
    }

    pub fn clients(&self) -> &[ClientProcess] {
        &self.clients
    }

    pub fn dqn(&self) -> Option<&DqnScheduler> {
        match &self.policy {
            Policy::Dqn(d) => Some(d),
            Policy::MonteCarlo(_) => None,
        }
    }

    pub fn action_space(&self) -> ActionSpace {
        let n = self.world.cfg.n;
        match self.cfg.scheduler {
            SchedulerKind::BenchmarkDrl => ActionSpace { first: 1, len: n },
            _ => ActionSpace { first: 0, len: n + 1 },
        }
    }

    /// Advances one time step.
    pub fn step(&mut self) -> Result<RunRecord> {
        let t = self.truth.t + 1;
        self.step_inner(t).map_err(|e| e.at_step(t))
    }

    fn step_inner(&mut self, t: usize) -> Result<RunRecord> {
        self.truth = self.world.step_state(&self.truth, &mut self.dynamics);

        let queried: Vec<bool> = self.clients.iter_mut().map(|c| c.advance(&mut self.chains)).collect();
        let taus: Vec<u64> = self.clients.iter().map(|c| c.tau).collect();

        let predicted = self.filter.predict(&self.fs)?;
        let action = match &mut self.policy {
            Policy::Dqn(d) => {
                let obs = match d.variant() {
                    crate::schedulers::DqnVariant::Proposed => proposed_observation(&predicted.prior_cov, &taus),
                    crate::schedulers::DqnVariant::Benchmark => {
                        benchmark_observation(&predicted.prior_mean, &predicted.prior_cov, &taus)
                    }
                };
                d.act(obs)?
            }
            Policy::MonteCarlo(mc) => {
                let asking: Vec<QueryingClient> = self
                    .clients
                    .iter()
                    .zip(&queried)
                    .filter(|(_, &q)| q)
                    .map(|(c, _)| QueryingClient { query: c.query, alpha: c.alpha })
                    .collect();
                mc.decide(&self.filter, &predicted, &asking)?
            }
        };
        let space = self.action_space();
        if action < space.first || action >= space.first + space.len {
            return Err(Error::Domain(format!("scheduler chose action {action} outside its action space")));
        }

        // Measurements and the channel draw happen every step so the
        // simulated world does not depend on the policy.
        let y = self.world.observe(&self.truth, &mut self.measurement);
        let theta = self.channel.uniform();
        let delivery = if action > 0 {
            Some(transmit_with(action, y[action - 1], theta)?)
        } else {
            None
        };
        let received = match delivery {
            Some(Delivery::Delivered(v)) => Some((v, action)),
            _ => None,
        };
        self.fs = self.filter.posterior(&predicted, received)?;

        let any = queried.iter().any(|&q| q);
        let sampler = if any {
            Some(GaussianSampler::new(&self.fs.post_mean, &self.fs.post_cov)?)
        } else {
            None
        };
        let mut records = Vec::with_capacity(self.clients.len());
        let mut outcomes = Vec::with_capacity(self.clients.len());
        for (c, &q) in self.clients.iter().zip(&queried) {
            if q {
                let sampler = sampler.as_ref().expect("sampler exists on query steps");
                let mse = mse_from_sampler(sampler, &c.query, self.cfg.samples, &mut self.mse)?;
                let z_true = c.query.eval(&self.truth.x)?;
                let z_hat = respond_with(
                    self.cfg.response,
                    &self.fs.post_mean,
                    &self.fs.post_cov,
                    &c.query,
                    self.cfg.samples,
                    &mut self.respond,
                )?;
                outcomes.push(ClientOutcome { alpha: c.alpha, tau: c.tau, mse: Some(mse) });
                records.push(ClientRecord { queried: true, mse: Some(mse), z_true: Some(z_true), z_hat: Some(z_hat) });
            } else {
                outcomes.push(ClientOutcome { alpha: c.alpha, tau: c.tau, mse: None });
                records.push(ClientRecord { queried: false, mse: None, z_true: None, z_hat: None });
            }
        }
        let trace_pos = self.fs.post_cov.trace();
        let idle = match self.cfg.scheduler {
            SchedulerKind::BenchmarkDrl => IdleReward::Zero,
            _ => IdleReward::Incentive { mu: self.cfg.mu },
        };
        let r = reward(&outcomes, action, idle, trace_pos);

        if let Policy::Dqn(d) = &mut self.policy {
            d.learn(r)?;
        }

        Ok(RunRecord {
            t,
            action,
            transmitted: action != 0,
            erased: matches!(delivery, Some(Delivery::Erased)),
            reward: r,
            trace_pri: predicted.prior_cov.trace(),
            trace_pos,
            clients: records,
            warmup: t <= self.cfg.warmup,
        })
    }
}

/// Runs `cfg.horizon` steps and summarizes the evaluation window.
pub fn run_experiment(cfg: &ExperimentConfig, seed: u64) -> Result<(Vec<RunRecord>, RunSummary)> {
    let start = Instant::now();
    let mut exp = Experiment::new(cfg, seed)?;
    let mut records = Vec::with_capacity(cfg.horizon);
    for _ in 0..cfg.horizon {
        records.push(exp.step()?);
    }
    let mut summary = summarize(&records, exp.action_space());
    summary.seed = seed;
    summary.config_echo = serde_json::to_value(cfg)?;
    summary.wall_clock_secs = start.elapsed().as_secs_f64();
    Ok((records, summary))
}
