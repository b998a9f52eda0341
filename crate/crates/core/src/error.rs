use thiserror::Error;

/// Errors raised by the simplex calculus, the simulators and the verifiers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("entry {index} is not a positive finite number ({value})")]
    NonPositiveEntry { index: usize, value: f64 },
    #[error("entries sum to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error("entry {index} = {value:e} is too close to the simplex boundary to take logarithms")]
    BoundaryProximity { index: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("bad dimension {0}: need at least 2 components")]
    BadDimension(usize),
    #[error("operation requires n = {expected}, got n = {got}")]
    WrongDimension { expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("decomposition has lambda = 0; use the zero-lambda Nash set instead")]
    LambdaZero,
    #[error("decomposition has lambda = {0} > 0")]
    LambdaNonzero(f64),
    #[error("point is not a Nash equilibrium")]
    NotNash,
    #[error("support enumeration limited to n <= 5, got {0}")]
    TooLarge(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("RK4 stage moved the state by {0:e}, step size is too large")]
    StepTooLarge(f64),
    #[error("time must be positive, got {0}")]
    NonpositiveTime(f64),
    #[error("dt = {dt} does not resolve the correlation time (need dt <= {max})")]
    StepVsCorrelation { dt: f64, max: f64 },
    #[error("walk of length {len} is too short for {needed} steps")]
    WalkTooShort { len: usize, needed: usize },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("empty sample")]
    Empty,
    #[error("trajectories do not share a time grid")]
    GridMismatch,
    #[error("quantiles are not strictly increasing at index {0}")]
    NonMonotone(usize),
    #[error("size mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("Newton iteration did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    NoConvergence { iterations: usize, grad_norm: f64 },
    #[error("step law violates its moment constraints: {0}")]
    BadStepLaw(String),
}

pub type Result<T> = std::result::Result<T, Error>;
