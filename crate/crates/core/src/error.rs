use thiserror::Error;

/// Errors produced by the sampling structures and estimators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("input is empty")]
    EmptyInput,

    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("exponent p = {0} must be finite and at least 1")]
    InvalidExponent(f64),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("cannot sample from an all-zero weight vector")]
    EmptyDistribution,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("error scale undefined: x[{index}] = 0 with y[{index}] != 0 and p > 2")]
    UndefinedScale { index: usize },

    #[error("linear combination Ax is the zero vector")]
    ZeroCombination,

    #[error("rejection sampler exceeded its iteration cap of {cap}")]
    IterationCapExceeded { cap: u64 },

    #[error("no closed form available for {0}")]
    NoClosedForm(String),

    #[error("malformed tree snapshot: {0}")]
    Decode(String),

    #[error("internal consistency failure: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;
