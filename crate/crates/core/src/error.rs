use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty scene")]
    EmptyScene,
    #[error("empty candidate")]
    EmptyCandidate,
    #[error("empty ground truth")]
    EmptyGroundTruth,
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unknown instance id {0}")]
    UnknownInstance(i32),
    #[error("{0}")]
    Format(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("config: {0}")]
    Config(String),
    #[error("placement failed after {attempts} attempts for spec {spec}")]
    Placement { attempts: usize, spec: String },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimMismatch(msg.into())
    }
}
