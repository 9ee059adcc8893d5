use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },
    #[error("grid mismatch between operands")]
    GridMismatch,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("instability detected at step {step} (t = {time:.1} s): max |q| = {max_abs:e}")]
    Instability { step: u64, time: f64, max_abs: f64 },
    #[error("objective is not finite at the initial parameters")]
    NonFiniteObjective,
    #[error("every candidate was unstable in every phase")]
    AllUnstable,
    #[error("format error: {0}")]
    Format(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
