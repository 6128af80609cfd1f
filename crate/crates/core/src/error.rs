use thiserror::Error;

/// Errors raised by the learners, the bound calculators and the benchmark harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("point {point:?} lies outside the domain")]
    Domain { point: Vec<f64> },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{what} would produce {count} items, above the limit of {limit}")]
    Size {
        what: &'static str,
        count: u128,
        limit: u128,
    },

    #[error("input mismatch: {0}")]
    Input(String),

    #[error("formula out of scope: {0}")]
    Scope(String),

    #[error("slope fit failed: {0}")]
    Fit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
