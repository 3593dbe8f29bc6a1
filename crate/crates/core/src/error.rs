use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate parameters: {0}")]
    DegenerateParameters(String),

    #[error("integration failed: {0}")]
    IntegrationFailure(String),

    #[error("no unique steady state: {0}")]
    NoUniqueSteadyState(String),

    #[error("undefined statistic: {0}")]
    UndefinedStatistic(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("truncation limit exceeded: leakage {leakage:.3e} > {limit:.1e}")]
    Truncation { leakage: f64, limit: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
