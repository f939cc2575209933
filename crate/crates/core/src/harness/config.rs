use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{Nlsd, WorldConfig};
use crate::estimator::{CrossCov, FilterOptions, Innovation};
use crate::numerics::{Matrix, Vector};
use crate::queries::{Chain, ClientProcess, QueryFn, ResponseMode};
use crate::schedulers::{DqnParams, Eviction};
use crate::{Error, Result};

/// Query rate of the memoryless chain when none is given.
pub const DEFAULT_MEMORYLESS_Q: f64 = 1.0 / 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerKind {
    #[default]
    Proposed,
    BenchmarkDrl,
    Montecarlo,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NlsdSpec {
    #[default]
    Logistic,
    Roll,
    /// Linear dynamics `x ← A x`, row-major.
    Custom(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldSpec {
    pub m: usize,
    pub n: usize,
    /// Diagonal process noise variance.
    pub process_noise_var: f64,
    /// Diagonal measurement noise variance.
    pub measurement_noise_var: f64,
    pub nlsd: NlsdSpec,
    /// Row-major `N × M` observation matrix; identity when absent.
    pub h: Option<Vec<Vec<f64>>>,
    pub x0: Option<Vec<f64>>,
}

impl Default for WorldSpec {
    fn default() -> Self {
        Self {
            m: 20,
            n: 20,
            process_noise_var: 2.5e-3,
            measurement_noise_var: 1.0,
            nlsd: NlsdSpec::Logistic,
            h: None,
            x0: None,
        }
    }
}

fn matrix_from_rows(rows: &[Vec<f64>], r: usize, c: usize, what: &str) -> Result<Matrix> {
    if rows.len() != r || rows.iter().any(|row| row.len() != c) {
        return Err(Error::InvalidConfig(format!("{what} must be {r}x{c}")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(Matrix::from_row_slice(r, c, &flat))
}

impl WorldSpec {
    pub fn build(&self) -> Result<WorldConfig> {
        let (m, n) = (self.m, self.n);
        if m == 0 || n == 0 {
            return Err(Error::InvalidConfig("M and N must be positive".into()));
        }
        for (name, v) in [
            ("process_noise_var", self.process_noise_var),
            ("measurement_noise_var", self.measurement_noise_var),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be finite and >= 0")));
            }
        }
        let nlsd = match &self.nlsd {
            NlsdSpec::Logistic => Nlsd::Logistic,
            NlsdSpec::Roll => Nlsd::Roll,
            NlsdSpec::Custom(rows) => Nlsd::Custom(matrix_from_rows(rows, m, m, "custom dynamics matrix")?),
        };
        let h = match &self.h {
            Some(rows) => matrix_from_rows(rows, n, m, "H")?,
            None => Matrix::identity(n, m),
        };
        let x0 = match &self.x0 {
            Some(v) if v.len() != m => {
                return Err(Error::InvalidConfig("x0 must have length M".into()));
            }
            Some(v) => Vector::from_vec(v.clone()),
            None => Vector::zeros(m),
        };
        let cfg = WorldConfig {
            m,
            n,
            process_noise: Matrix::identity(m, m) * self.process_noise_var,
            measurement_noise: Matrix::identity(n, n) * self.measurement_noise_var,
            h,
            nlsd,
            x0,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ChainSpec {
    Periodic {
        #[serde(default = "default_period")]
        period: usize,
        /// State label, `A` being the query state.
        initial: char,
    },
    Memoryless {
        #[serde(default = "default_q")]
        q: f64,
    },
}

fn default_period() -> usize {
    6
}

fn default_q() -> f64 {
    DEFAULT_MEMORYLESS_Q
}

/// Query kinds; count-range bounds default to the NLSD-specific window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum QuerySpec {
    CurrentState,
    Maximum,
    CountRange {
        #[serde(default)]
        lo: Option<f64>,
        #[serde(default)]
        hi: Option<f64>,
    },
    SampleMean,
    SampleVariance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientSpec {
    pub chain: ChainSpec,
    pub query: QuerySpec,
    #[serde(default = "one")]
    pub alpha: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RosterSpec {
    /// `1`: periodic from `D` and `B`; `2`: both memoryless; `3`:
    /// memoryless and periodic from `B`; `4`: four period-12 chains from
    /// `B, D, F, H` asking maximum, count range, mean and variance.
    Preset(u8),
    List(Vec<ClientSpec>),
}

impl Default for RosterSpec {
    fn default() -> Self {
        RosterSpec::Preset(1)
    }
}

impl RosterSpec {
    pub fn clients(&self) -> Result<Vec<ClientSpec>> {
        let periodic = |period, initial| ChainSpec::Periodic { period, initial };
        let memoryless = ChainSpec::Memoryless { q: DEFAULT_MEMORYLESS_Q };
        let cr = QuerySpec::CountRange { lo: None, hi: None };
        let pair = |a: ChainSpec, b: ChainSpec| {
            vec![
                ClientSpec { chain: a, query: QuerySpec::Maximum, alpha: 1.0 },
                ClientSpec { chain: b, query: cr, alpha: 1.0 },
            ]
        };
        Ok(match self {
            RosterSpec::Preset(1) => pair(periodic(6, 'D'), periodic(6, 'B')),
            RosterSpec::Preset(2) => pair(memoryless.clone(), memoryless),
            RosterSpec::Preset(3) => pair(memoryless, periodic(6, 'B')),
            RosterSpec::Preset(4) => [
                ('B', QuerySpec::Maximum),
                ('D', cr),
                ('F', QuerySpec::SampleMean),
                ('H', QuerySpec::SampleVariance),
            ]
            .into_iter()
            .map(|(s, q)| ClientSpec { chain: periodic(12, s), query: q, alpha: 1.0 })
            .collect(),
            RosterSpec::Preset(k) => {
                return Err(Error::InvalidConfig(format!("unknown client preset {k} (expected 1-4)")));
            }
            RosterSpec::List(v) if v.is_empty() => {
                return Err(Error::InvalidConfig("client list is empty".into()));
            }
            RosterSpec::List(v) => v.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub world: WorldSpec,
    pub scheduler: SchedulerKind,
    pub dqn: DqnParams,
    pub clients: RosterSpec,
    /// No-query incentive weight of the proposed agent.
    pub mu: f64,
    /// Posterior samples per MSE estimate and per Monte Carlo sensor.
    pub samples: usize,
    pub nprime: usize,
    /// ϖ; NLSD-specific value when absent.
    pub level_gain: Option<f64>,
    /// ς; NLSD-specific value when absent.
    pub trend_gain: Option<f64>,
    pub horizon: usize,
    pub warmup: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub cross_cov: CrossCovFlag,
    pub innovation: InnovationFlag,
    pub response: ResponseMode,
    pub eviction: Eviction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossCovFlag {
    #[default]
    Paper,
    Standard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnovationFlag {
    #[default]
    Full,
    Scalar,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            world: WorldSpec::default(),
            scheduler: SchedulerKind::Proposed,
            dqn: DqnParams::default(),
            clients: RosterSpec::default(),
            mu: 0.1,
            samples: 100,
            nprime: 2,
            level_gain: None,
            trend_gain: None,
            horizon: 4000,
            warmup: 2000,
            seed: 0,
            out: None,
            cross_cov: CrossCovFlag::Paper,
            innovation: InnovationFlag::Full,
            response: ResponseMode::Plugin,
            eviction: Eviction::Paper,
        }
    }
}

impl ExperimentConfig {
    /// Parses JSON; errors carry the offending field path and position.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::Parse(format!(
                "at `{path}` (line {}, column {}): {inner}",
                inner.line(),
                inner.column()
            ))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.warmup >= self.horizon {
            return bad(format!(
                "warm-up ({}) must be shorter than the horizon ({})",
                self.warmup, self.horizon
            ));
        }
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return bad(format!("mu must lie in (0, 1], got {}", self.mu));
        }
        if self.samples < 2 {
            return bad("samples must be at least 2".into());
        }
        if self.nprime == 0 {
            return bad("nprime must be positive".into());
        }
        let (w, s) = self.smoothing();
        if !(0.0..=1.0).contains(&w) || !(0.0..=1.0).contains(&s) {
            return bad("smoothing constants must lie in [0, 1]".into());
        }
        self.dqn.validate()?;
        let world = self.world.build()?;
        let clients = self.build_clients()?;
        for c in &clients {
            c.query.validate(world.m)?;
            if !(c.alpha >= 0.0 && c.alpha <= 1.0) {
                return bad(format!("client {} alpha must lie in [0, 1]", c.id));
            }
        }
        Ok(())
    }

    /// `(ϖ, ς)`.
    pub fn smoothing(&self) -> (f64, f64) {
        let (w, s) = match self.world.nlsd {
            NlsdSpec::Roll => (0.75, 0.025),
            _ => (0.77, 0.02),
        };
        (self.level_gain.unwrap_or(w), self.trend_gain.unwrap_or(s))
    }

    /// Default count-range window for the configured dynamics.
    pub fn count_range_window(&self) -> (f64, f64) {
        match self.world.nlsd {
            NlsdSpec::Roll => (-0.2, -0.1),
            _ => (-0.5, -0.2),
        }
    }

    pub fn filter_options(&self) -> FilterOptions {
        FilterOptions {
            cross_cov: match self.cross_cov {
                CrossCovFlag::Paper => CrossCov::Paper,
                CrossCovFlag::Standard => CrossCov::Standard,
            },
            innovation: match self.innovation {
                InnovationFlag::Full => Innovation::Full,
                InnovationFlag::Scalar => Innovation::Scalar,
            },
        }
    }

    pub fn dqn_params(&self) -> DqnParams {
        DqnParams {
            eviction: self.eviction,
            ..self.dqn.clone()
        }
    }

    pub fn build_clients(&self) -> Result<Vec<ClientProcess>> {
        let (lo_d, hi_d) = self.count_range_window();
        self.clients
            .clients()?
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let chain = match c.chain {
                    ChainSpec::Periodic { period, initial } => Chain::periodic_from_letter(period, initial)?,
                    ChainSpec::Memoryless { q } if (0.0..=1.0).contains(&q) => Chain::Memoryless { q },
                    ChainSpec::Memoryless { q } => {
                        return Err(Error::InvalidConfig(format!("memoryless rate {q} outside [0, 1]")));
                    }
                };
                let query = match c.query {
                    QuerySpec::CurrentState => QueryFn::CurrentState,
                    QuerySpec::Maximum => QueryFn::Maximum,
                    QuerySpec::CountRange { lo, hi } => QueryFn::CountRange {
                        lo: lo.unwrap_or(lo_d),
                        hi: hi.unwrap_or(hi_d),
                    },
                    QuerySpec::SampleMean => QueryFn::SampleMean,
                    QuerySpec::SampleVariance => QueryFn::SampleVariance,
                };
                Ok(ClientProcess::new(i + 1, query, chain, c.alpha))
            })
            .collect()
    }
}
