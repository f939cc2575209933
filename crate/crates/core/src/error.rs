use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (jitter retries exhausted)")]
    NotPositiveDefinite,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("root isolation failure: found {found} of {expected} roots")]
    RootIsolation { found: usize, expected: usize },

    #[error("innovation covariance singular")]
    InnovationSingular,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("undefined variance: sample variance needs at least two components")]
    UndefinedVariance,

    #[error("no transmission has no erasure probability")]
    IdleAction,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            Error::AtStep { .. } => self,
            other => Error::AtStep {
                step,
                source: Box::new(other),
            },
        }
    }
}
