use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension must be at least 1 (got {0})")]
    InvalidDimension(usize),
    #[error("exponent p must satisfy p > 2 (got p = {0})")]
    InvalidExponent(f64),
    #[error("exponent p = {0} is too close to 2: (p-1)/(p-2) overflows; require p >= 2.001")]
    DegenerateExponent(f64),
    #[error("time must be positive (got {0})")]
    NonPositiveTime(f64),
    #[error("point coincides with the center: the drift is singular there")]
    SingularPoint,
    #[error("vector has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("quadrature did not converge: estimate {estimate}, error bound {error_bound}")]
    Quadrature { estimate: f64, error_bound: f64 },
    #[error("root bracket [{lo}, {hi}] does not enclose a sign change")]
    InvalidBracket { lo: f64, hi: f64 },
    #[error("root finding did not converge within {0} iterations")]
    RootNotConverged(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite state on path {path} at step {step}")]
    NonFinite { path: u64, step: u64 },
    #[error("solver aborted: {0}")]
    SolverAbort(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
