use thiserror::Error;

/// Errors raised by the numerical modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("wave function is not normalized (norm² = {norm_sq})")]
    NotNormalized { norm_sq: f64 },

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("auxiliary solution has a node at ξ = {xi} (grid index {index})")]
    Positivity { index: usize, xi: f64 },

    #[error("model construction failed: {0}")]
    Construction(String),

    #[error("normalization integral deviates from 1 by {deviation:e}; grid too small")]
    GridTooSmall { deviation: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("norm drift {drift:e} at step {step}")]
    NormDrift { step: usize, drift: f64 },

    #[error("level at E = {energy} is unresolved; run length must be at least T = {required_t}")]
    Unresolved { energy: f64, required_t: f64 },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
