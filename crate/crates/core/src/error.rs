use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid link dimension {0}: need n >= 2")]
    InvalidDimension(usize),

    #[error("{what} out of range: {value} (allowed {allowed})")]
    OutOfRange {
        what: &'static str,
        value: i64,
        allowed: String,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid basis state: {0}")]
    Encoding(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "dense dimension {dim} exceeds the cap {cap}; restrict to a symmetry sector or raise --cap"
    )]
    Capacity { dim: usize, cap: usize },

    #[error("state is not normalized: |psi|^2 = {0}")]
    NotNormalized(f64),

    #[error("physical sector is empty")]
    EmptySector,

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
