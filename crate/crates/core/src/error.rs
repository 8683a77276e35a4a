use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} outside [{lo}, {hi}]")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("bracket expansion diverged: {0}")]
    Divergence(String),

    #[error("optimization failed: {0}")]
    OptimizationFailure(String),

    #[error("node budget exceeded: {required} nodes required, budget is {budget}")]
    NodeBudget { required: u128, budget: u64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("integrity check failed: {0}")]
    Integrity(String),

    #[error("io error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64, lo: f64, hi: f64) -> Self {
        Error::Domain { what, value, lo, hi }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl Error {
    /// Process exit status for this error: 2 for bad configuration or input
    /// data, 3 for resource and I/O failures, 1 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Precondition(_)
            | Error::Domain { .. }
            | Error::DimensionMismatch { .. }
            | Error::Unsupported(_)
            | Error::Integrity(_)
            | Error::Csv(_) => 2,
            Error::Io { .. } | Error::NodeBudget { .. } | Error::Json(_) => 3,
            Error::Divergence(_) | Error::OptimizationFailure(_) | Error::Numeric(_) => 1,
        }
    }
}
