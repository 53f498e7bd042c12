use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },
    #[error("non-finite state encountered at t = {t}")]
    NonFinite { t: f64 },
    #[error("integration exceeded {0} steps")]
    TooManySteps(usize),
    #[error("no cycle detected: {0}")]
    NoCycle(String),
    #[error("newton iteration failed after {iterations} iterations (residual {residual:e})")]
    NewtonFailed { iterations: usize, residual: f64 },
    #[error("singular bordered matrix: {0}")]
    Singular(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("perturbed trajectory did not converge: {0}")]
    NotConverged(String),
    #[error("zero signal: {0}")]
    ZeroSignal(String),
    #[error("undefined: {0}")]
    Undefined(String),
}

pub type Result<T> = std::result::Result<T, Error>;
