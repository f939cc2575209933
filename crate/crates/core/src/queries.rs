//! Client query functions, the Markov-chain query processes, the
//! sampling estimate of the query response MSE, and the scheduler reward.

use serde::{Deserialize, Serialize};

use crate::numerics::{sample_variance, GaussianSampler, Matrix, RngStream, Vector};
use crate::{Error, Result};

/// τ counters saturate here.
pub const TAU_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryFn {
    CurrentState,
    Maximum,
    /// Number of components inside `[lo, hi]`.
    CountRange { lo: f64, hi: f64 },
    SampleMean,
    SampleVariance,
}

#[derive(Debug, Clone, PartialEq)]
pub enum QueryValue {
    Scalar(f64),
    Vector(Vector),
}

impl QueryValue {
    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            QueryValue::Scalar(v) => Some(*v),
            QueryValue::Vector(_) => None,
        }
    }

    /// CSV cell: scalars verbatim, vectors `;`-joined.
    pub fn to_cell(&self) -> String {
        match self {
            QueryValue::Scalar(v) => v.to_string(),
            QueryValue::Vector(v) => v
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(";"),
        }
    }
}

impl QueryFn {
    pub fn validate(&self, m: usize) -> Result<()> {
        match *self {
            QueryFn::CountRange { lo, hi } if !(lo <= hi) => Err(Error::InvalidConfig(format!(
                "count range needs lo <= hi, got [{lo}, {hi}]"
            ))),
            QueryFn::SampleVariance if m < 2 => Err(Error::UndefinedVariance),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            QueryFn::CurrentState => "current_state",
            QueryFn::Maximum => "maximum",
            QueryFn::CountRange { .. } => "count_range",
            QueryFn::SampleMean => "sample_mean",
            QueryFn::SampleVariance => "sample_variance",
        }
    }

    /// Scalar queries only; `None` for [`QueryFn::CurrentState`].
    fn eval_scalar(&self, x: &Vector) -> Option<f64> {
        let m = x.len() as f64;
        match *self {
            QueryFn::CurrentState => None,
            QueryFn::Maximum => Some(x.max()),
            QueryFn::CountRange { lo, hi } => {
                Some(x.iter().filter(|&&v| lo <= v && v <= hi).count() as f64)
            }
            QueryFn::SampleMean => Some(x.sum() / m),
            QueryFn::SampleVariance => {
                let mean = x.sum() / m;
                Some(x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0))
            }
        }
    }

    pub fn eval(&self, x: &Vector) -> Result<QueryValue> {
        self.validate(x.len())?;
        Ok(match self.eval_scalar(x) {
            Some(v) => QueryValue::Scalar(v),
            None => QueryValue::Vector(x.clone()),
        })
    }
}

/// How the edge node forms its answer from the posterior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseMode {
    /// `z_c(x̂_pos)`
    #[default]
    Plugin,
    /// Mean of `z_c` over posterior samples.
    SampleMean,
}

/// Answer to a query given the posterior.
pub fn respond(mean: &Vector, q: &QueryFn) -> Result<QueryValue> {
    q.eval(mean)
}

pub fn respond_with(
    mode: ResponseMode,
    mean: &Vector,
    cov: &Matrix,
    q: &QueryFn,
    samples: usize,
    rng: &mut RngStream,
) -> Result<QueryValue> {
    match mode {
        ResponseMode::Plugin => respond(mean, q),
        ResponseMode::SampleMean => {
            q.validate(mean.len())?;
            let sampler = GaussianSampler::new(mean, cov)?;
            let n = samples.max(1);
            let mut acc: Option<QueryValue> = None;
            for _ in 0..n {
                let v = q.eval(&sampler.sample(rng))?;
                acc = Some(match (acc, v) {
                    (None, v) => v,
                    (Some(QueryValue::Scalar(a)), QueryValue::Scalar(b)) => QueryValue::Scalar(a + b),
                    (Some(QueryValue::Vector(a)), QueryValue::Vector(b)) => QueryValue::Vector(a + b),
                    _ => unreachable!("query value kind is fixed per query"),
                });
            }
            Ok(match acc.expect("at least one sample") {
                QueryValue::Scalar(a) => QueryValue::Scalar(a / n as f64),
                QueryValue::Vector(a) => QueryValue::Vector(a / n as f64),
            })
        }
    }
}

/// Sample variance of the query over `samples` draws from
/// `N(mean, cov)`. For the vector-valued current-state query the
/// per-component variances are summed.
pub fn estimate_query_mse(
    mean: &Vector,
    cov: &Matrix,
    q: &QueryFn,
    samples: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    let sampler = GaussianSampler::new(mean, cov)?;
    mse_from_sampler(&sampler, q, samples, rng)
}

pub(crate) fn mse_from_sampler(
    sampler: &GaussianSampler,
    q: &QueryFn,
    samples: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    if samples < 2 {
        return Err(Error::Domain("MSE estimate needs at least two samples".into()));
    }
    q.validate(sampler.dim())?;
    let draws = (0..samples).map(|_| sampler.sample(rng));
    Ok(match q {
        QueryFn::CurrentState => {
            let xs: Vec<Vector> = draws.collect();
            (0..sampler.dim())
                .map(|k| sample_variance(&xs.iter().map(|x| x[k]).collect::<Vec<_>>()))
                .sum()
        }
        _ => {
            let u: Vec<f64> = draws
                .map(|x| q.eval_scalar(&x).expect("scalar query"))
                .collect();
            sample_variance(&u)
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Chain {
    /// Cycles through `period` states `A, B, …`; a query is issued on
    /// entering state `A` (index 0).
    Periodic { period: usize, state: usize },
    /// Issues a query with probability `q` on every step.
    Memoryless { q: f64 },
}

impl Chain {
    /// Periodic chain starting in the state labelled `initial`
    /// (`'A'` = 0). Starting in `D` with period 6 queries first at step 3.
    pub fn periodic_from_letter(period: usize, initial: char) -> Result<Self> {
        let c = initial.to_ascii_uppercase();
        if !c.is_ascii_uppercase() {
            return Err(Error::InvalidConfig(format!("bad chain state label {initial:?}")));
        }
        let state = (c as u8 - b'A') as usize;
        if period == 0 || state >= period {
            return Err(Error::InvalidConfig(format!(
                "state {c} does not exist in a chain with {period} states"
            )));
        }
        Ok(Chain::Periodic { period, state })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientProcess {
    pub id: usize,
    pub query: QueryFn,
    pub chain: Chain,
    /// Steps since the last query (also counts from start before the first).
    pub tau: u64,
    pub alpha: f64,
}

impl ClientProcess {
    pub fn new(id: usize, query: QueryFn, chain: Chain, alpha: f64) -> Self {
        Self {
            id,
            query,
            chain,
            tau: 0,
            alpha,
        }
    }

    /// Advances the chain one step; returns whether a query was issued.
    pub fn advance(&mut self, rng: &mut RngStream) -> bool {
        let queried = match &mut self.chain {
            Chain::Periodic { period, state } => {
                *state = (*state + 1) % *period;
                *state == 0
            }
            Chain::Memoryless { q } => rng.uniform() < *q,
        };
        self.tau = if queried {
            0
        } else {
            (self.tau + 1).min(TAU_CAP)
        };
        queried
    }
}

/// Per-client inputs to the reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClientOutcome {
    pub alpha: f64,
    pub tau: u64,
    /// Present on query steps.
    pub mse: Option<f64>,
}

/// What a step without queries is worth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IdleReward {
    /// `-μ^{1(p==0)} trace(Ψ_pos)`
    Incentive { mu: f64 },
    Zero,
}

/// `-Σ α_c MSE_c 1(τ_c == 0)` when any client queried, otherwise the
/// idle reward.
pub fn reward(outcomes: &[ClientOutcome], p: usize, idle: IdleReward, post_cov_trace: f64) -> f64 {
    let any_query = outcomes.iter().any(|o| o.tau == 0);
    if any_query {
        -outcomes
            .iter()
            .filter(|o| o.tau == 0)
            .map(|o| o.alpha * o.mse.unwrap_or(0.0))
            .sum::<f64>()
    } else {
        match idle {
            IdleReward::Incentive { mu } => {
                let factor = if p == 0 { mu } else { 1.0 };
                -factor * post_cov_trace
            }
            IdleReward::Zero => 0.0,
        }
    }
}
