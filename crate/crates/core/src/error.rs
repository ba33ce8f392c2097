use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("type index {index} out of range for T = {types}")]
    TypeOutOfRange { index: usize, types: usize },

    #[error("inconsistent block outcome {0}")]
    InconsistentBlock(String),

    #[error("instance too large: {stops} stops exceeds the limit of {limit}")]
    InstanceTooLarge { stops: usize, limit: usize },

    #[error("node {0} is not covered by any stop")]
    UncoveredNode(usize),

    #[error("no value of ell up to {max_ell} reaches the target hit rate (worst n = {worst_n}, hit rate {hit_rate:.3})")]
    Unachievable {
        max_ell: u32,
        worst_n: u32,
        hit_rate: f64,
    },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("ell table has no entry for epsilon = {0}")]
    MissingEll(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
