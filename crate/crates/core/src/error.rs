use thiserror::Error;

use crate::game::ValidationReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("wrong horizon mode: operation needs a {expected} game")]
    HorizonMode { expected: &'static str },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error("game failed validation:\n{0}")]
    Validation(ValidationReport),

    #[error("unknown environment `{0}`")]
    UnknownEnvironment(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("size overflow: {0}")]
    SizeOverflow(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
