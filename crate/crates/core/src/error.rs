use alloc::string::String;

/// Errors raised by the decomposition pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A tree or ensemble violates a structural invariant.
    #[error("structural error: {0}")]
    Structure(String),
    /// Caller-provided data is unusable (dimension mismatch, non-finite value).
    #[error("input error: {0}")]
    Input(String),
    /// A configuration value is out of range.
    #[error("config error: {0}")]
    Config(String),
    /// The data sample is empty.
    #[error("empty data sample")]
    EmptyData,
    /// The iterative solver hit its iteration cap.
    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    /// A metric is undefined on the given inputs.
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
    /// The requested operation is not supported for these arguments.
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// A dense reference computation exceeds its size budget.
    #[error("problem too large: {columns} columns exceed the limit of {limit}")]
    TooLarge { columns: usize, limit: usize },
    /// An internal invariant does not hold.
    #[error("invariant violation: {0}")]
    Invariant(String),
}

pub type Result<T> = core::result::Result<T, Error>;
