use serde::{Deserialize, Serialize};

use super::replay::{Eviction, ReplayBuffer, ReplayTuple};
use super::{decay_epsilon_with, epsilon_greedy};
use crate::neural::{clip_gradients, td_loss, Mlp, Mode, Rmsprop};
use crate::numerics::{Matrix, RngStream, StreamId, Vector};
use crate::{Error, Result};

/// Agent hyperparameters. Defaults are the values used in the experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DqnParams {
    pub gamma: f64,
    pub clip: f64,
    pub learning_rate: f64,
    /// Inverse-time decay: the k-th update uses `learning_rate / (1 + lr_decay·k)`.
    pub lr_decay: f64,
    pub rmsprop_rho: f64,
    pub rmsprop_eps: f64,
    pub epsilon_start: f64,
    pub epsilon_min: f64,
    pub epsilon_step: f64,
    pub target_sync: usize,
    /// Minibatch size is this times the number of actions.
    pub batch_per_action: usize,
    /// Buffer capacity is this times the number of actions.
    pub buffer_per_action: usize,
    pub init_range: f64,
    pub transition: Transition,
    /// Set from the experiment-level flag.
    #[serde(skip)]
    pub eviction: Eviction,
}

impl Default for DqnParams {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            clip: 5.0,
            learning_rate: 1.0,
            lr_decay: 0.01,
            rmsprop_rho: 0.9,
            rmsprop_eps: 1e-8,
            epsilon_start: 1.0,
            epsilon_min: 0.1,
            epsilon_step: 0.005,
            target_sync: 20,
            batch_per_action: 30,
            buffer_per_action: 100,
            init_range: 0.3,
            transition: Transition::Literal,
            eviction: Eviction::Paper,
        }
    }
}

impl DqnParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.clip > 0.0) {
            return bad("clip threshold must be positive");
        }
        if !(self.learning_rate > 0.0) || !(self.rmsprop_eps > 0.0) || !(0.0..1.0).contains(&self.rmsprop_rho) {
            return bad("RMSProp needs lr > 0, eps > 0 and rho in [0, 1)");
        }
        if !(self.lr_decay >= 0.0) || !self.lr_decay.is_finite() {
            return bad("lr_decay must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&self.epsilon_min)
            || !(self.epsilon_min..=1.0).contains(&self.epsilon_start)
            || self.epsilon_step < 0.0
        {
            return bad("exploration schedule must satisfy 0 <= min <= start <= 1, step >= 0");
        }
        if self.target_sync == 0 || self.batch_per_action == 0 || self.batch_per_action > self.buffer_per_action {
            return bad("need target_sync >= 1 and 1 <= batch_per_action <= buffer_per_action");
        }
        if !(self.init_range >= 0.0) {
            return bad("init_range must be non-negative");
        }
        Ok(())
    }
}

/// Which observation a stored transition pairs with the action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transition {
    /// `{o(t-1), p(t), r(t), o(t)}`: the action is stored with the
    /// observation preceding the one it was chosen on.
    #[default]
    Literal,
    /// `{o(t), p(t), r(t), o(t+1)}`, stored one step later.
    Aligned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DqnVariant {
    /// Observes `(trace(Ψ_pri), τ)`; actions `{0, 1, …, N}`.
    Proposed,
    /// Observes `(x̂_pri, Ψ_pri, τ)`; actions `{1, …, N}`, zero reward on
    /// idle steps.
    Benchmark,
}

/// `q̄_j = r_j + γ max_i q_target(o_next_j)_i`.
pub fn target_values(batch: &[&ReplayTuple], target: &Mlp, gamma: f64) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::Domain("empty minibatch".into()));
    }
    let cols: Vec<Vector> = batch.iter().map(|t| t.o_next.clone()).collect();
    let (out, _) = target.forward_batch(&Matrix::from_columns(&cols), Mode::Eval)?;
    Ok(batch
        .iter()
        .zip(out.column_iter())
        .map(|(t, q)| t.reward + gamma * q.max())
        .collect())
}

#[derive(Debug, Clone)]
pub struct DqnScheduler {
    variant: DqnVariant,
    params: DqnParams,
    online: Mlp,
    target: Mlp,
    opt: Rmsprop,
    buffer: ReplayBuffer,
    epsilon: f64,
    eta: usize,
    explore: RngStream,
    minibatch: RngStream,
    dropout: RngStream,
    last_obs: Option<Vector>,
    last_step: Option<(Vector, usize, f64)>,
    pending: Option<(Vector, usize)>,
    train_steps: usize,
}

impl DqnScheduler {
    /// Proposed agent with a `[C+1, 4, N+1]` network.
    pub fn proposed(n_sensors: usize, n_clients: usize, params: DqnParams, seed: u64) -> Result<Self> {
        Self::build(
            DqnVariant::Proposed,
            &[n_clients + 1, 4, n_sensors + 1],
            &[],
            params,
            seed,
        )
    }

    /// Benchmark agent with a `[M+M²+C, 2.5M, M, N, N]` network and dropout
    /// `{0.1, 0.1, 0}` on the hidden layers.
    pub fn benchmark(m: usize, n_sensors: usize, n_clients: usize, params: DqnParams, seed: u64) -> Result<Self> {
        let wide = (5 * m).div_ceil(2);
        Self::build(
            DqnVariant::Benchmark,
            &[m + m * m + n_clients, wide, m, n_sensors, n_sensors],
            &[0.1, 0.1, 0.0],
            params,
            seed,
        )
    }

    fn build(variant: DqnVariant, sizes: &[usize], dropout: &[f64], params: DqnParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let mut init = RngStream::new(seed, StreamId::WeightInit);
        let online = Mlp::init(sizes, params.init_range, dropout, &mut init)?;
        let target = Mlp::init(sizes, params.init_range, dropout, &mut init)?;
        let actions = online.output_dim();
        let buffer = ReplayBuffer::new(
            actions * params.buffer_per_action,
            actions * params.batch_per_action,
            params.eviction,
        )?;
        let opt = Rmsprop::new(&online, params.learning_rate, params.rmsprop_rho, params.rmsprop_eps);
        Ok(Self {
            variant,
            epsilon: params.epsilon_start,
            params,
            online,
            target,
            opt,
            buffer,
            eta: 0,
            explore: RngStream::new(seed, StreamId::Exploration),
            minibatch: RngStream::new(seed, StreamId::Minibatch),
            dropout: RngStream::new(seed, StreamId::Dropout),
            last_obs: None,
            last_step: None,
            pending: None,
            train_steps: 0,
        })
    }

    pub fn variant(&self) -> DqnVariant {
        self.variant
    }

    pub fn params(&self) -> &DqnParams {
        &self.params
    }

    pub fn num_actions(&self) -> usize {
        self.online.output_dim()
    }

    pub fn observation_dim(&self) -> usize {
        self.online.input_dim()
    }

    pub fn online(&self) -> &Mlp {
        &self.online
    }

    pub fn target(&self) -> &Mlp {
        &self.target
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn eta(&self) -> usize {
        self.eta
    }

    /// Number of optimizer steps taken so far.
    pub fn train_steps(&self) -> usize {
        self.train_steps
    }

    fn to_sensor(&self, idx: usize) -> usize {
        match self.variant {
            DqnVariant::Proposed => idx,
            DqnVariant::Benchmark => idx + 1,
        }
    }

    /// Chooses the sensor to poll (`0` = none) for observation `o(t)`.
    pub fn act(&mut self, obs: Vector) -> Result<usize> {
        let values = self.online.predict(&obs)?;
        let idx = epsilon_greedy(&values, self.epsilon, &mut self.explore);
        self.pending = Some((obs, idx));
        Ok(self.to_sensor(idx))
    }

    /// Learning half of the step, after the reward for the last
    /// [`act`](Self::act) is known: buffer maintenance and store, target
    /// sync, one training step, exploration decay.
    pub fn learn(&mut self, reward: f64) -> Result<()> {
        let (obs, idx) = self
            .pending
            .take()
            .ok_or_else(|| Error::Domain("learn called without a preceding act".into()))?;
        match self.params.transition {
            Transition::Literal => {
                if let Some(prev) = self.last_obs.replace(obs.clone()) {
                    self.buffer.push(ReplayTuple {
                        o_prev: prev,
                        action: idx,
                        reward,
                        o_next: obs,
                    });
                }
            }
            Transition::Aligned => {
                if let Some((prev, a, r)) = self.last_step.replace((obs.clone(), idx, reward)) {
                    self.buffer.push(ReplayTuple {
                        o_prev: prev,
                        action: a,
                        reward: r,
                        o_next: obs,
                    });
                }
            }
        }
        self.eta += 1;
        if self.eta >= self.params.target_sync {
            Mlp::copy_weights(&self.online, &mut self.target)?;
            self.eta = 0;
        }
        if self.buffer.ready() {
            self.train()?;
        }
        self.epsilon = decay_epsilon_with(self.epsilon, self.params.epsilon_step, self.params.epsilon_min);
        Ok(())
    }

    /// One RMSProp step on a fresh minibatch; returns the loss before the
    /// step.
    fn train(&mut self) -> Result<f64> {
        let batch = self.buffer.sample(&mut self.minibatch);
        let targets = target_values(&batch, &self.target, self.params.gamma)?;
        let cols: Vec<Vector> = batch.iter().map(|t| t.o_prev.clone()).collect();
        let actions: Vec<usize> = batch.iter().map(|t| t.action).collect();
        let (out, cache) = self
            .online
            .forward_batch(&Matrix::from_columns(&cols), Mode::Train(&mut self.dropout))?;
        let (loss, grad_out) = td_loss(&out, &actions, &targets);
        let grads = clip_gradients(self.online.backward(&cache, &grad_out), self.params.clip);
        self.opt.lr = self.params.learning_rate / (1.0 + self.params.lr_decay * self.train_steps as f64);
        self.opt.step(&mut self.online, &grads);
        if self.online.parameters().iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("network parameters diverged".into()));
        }
        self.train_steps += 1;
        Ok(loss)
    }
}
