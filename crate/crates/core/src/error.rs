use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{n} is not an admissible sample size (nearest admissible: {nearest})")]
    NotInLattice { n: u64, nearest: u64 },

    #[error("block length {q} does not divide n = {n}")]
    NotADivisor { n: u64, q: u64 },

    #[error("inverse undefined: {0}")]
    InverseUndefined(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("class has {size} members; exhaustive search is limited to {max} (use gamma_greedy)")]
    ClassTooLarge { size: usize, max: usize },

    #[error("unknown class means: {0}")]
    UnknownMeans(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unknown suite `{name}`; available: {available}")]
    UnknownSuite { name: String, available: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
