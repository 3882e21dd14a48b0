use alloc::string::String;

/// Errors raised by the simulators, maps and statistics.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("model data is invalid: {0}")]
    InvalidModel(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-positive rate {value} for class {class}")]
    NonPositiveRate { class: usize, value: f64 },
    #[error("degenerate scale: {0}")]
    DegenerateScale(&'static str),
    #[error("unsupported distribution `{0}`")]
    UnsupportedDistribution(String),
    #[error("invariant violated at t={time}: {what}")]
    InvariantViolation { time: f64, what: String },
    #[error("no class-{0} customer is in service")]
    NoSuchCustomer(usize),
    #[error("grid time {0} lies outside the path horizon")]
    GridOutOfRange(f64),
    #[error("paths are not sampled on the same grid")]
    GridMismatch,
    #[error("step size must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("sample set `{0}` needs at least two values")]
    EmptySample(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
