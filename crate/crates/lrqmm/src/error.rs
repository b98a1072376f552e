use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite entry at flat index {0}")]
    NonFinite(usize),
    #[error("reference matrix has zero Frobenius norm")]
    ZeroNormReference,
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("integer accumulator could overflow: {0}")]
    Overflow(String),
    #[error("rank out of range: {0}")]
    RankOutOfRange(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 usage, 2 numerical contract
    /// violation, 3 i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Io(_) | Error::Serialize(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
