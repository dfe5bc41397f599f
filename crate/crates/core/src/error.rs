use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("degenerate posterior: evidence {evidence:e} is below {threshold:e}")]
    DegeneratePosterior { evidence: f64, threshold: f64 },

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("invalid gauge operator: {0}")]
    InvalidGauge(String),

    #[error("unsupported dimension: expected {expected}, found {found}")]
    UnsupportedDimension { expected: usize, found: usize },

    #[error("refused by cost guard: {0}")]
    CostGuard(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by malformed user input rather than numerics.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Parse(_) | Error::Io(_) | Error::Csv(_))
    }
}
