use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::vehicle::FrameError;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad error category, used for exit codes and HTTP status mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    /// Bad arguments, parameters or configuration.
    Usage,
    /// Input data does not conform to its schema.
    Schema,
    /// Training could not produce a model.
    Training,
    /// Filesystem or transport failure.
    Io,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(String),

    #[error("unknown channel column `{0}`")]
    UnknownChannel(String),

    #[error("missing channel column `{0}`")]
    MissingChannel(String),

    #[error("unknown label token `{0}`")]
    UnknownLabel(String),

    #[error("line {line}: {message}")]
    BadCell { line: u64, message: String },

    #[error("ragged trials: trial {trial} has {found} samples, expected {expected}")]
    RaggedTrial { trial: u64, found: usize, expected: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite sample value in {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("dimension mismatch: expected {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("training requires at least two classes, found {0}")]
    SingleClass(usize),

    #[error("training diverged: {0}")]
    TrainingDiverged(String),

    #[error("model file rejected: {0}")]
    ModelFormat(String),

    #[error("vehicle outside world bounds at ({x}, {y})")]
    OutOfBounds { x: f64, y: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Frame(#[from] FrameError),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. } => ErrorClass::Io,
            Error::Csv(_)
            | Error::UnknownChannel(_)
            | Error::MissingChannel(_)
            | Error::UnknownLabel(_)
            | Error::BadCell { .. }
            | Error::RaggedTrial { .. }
            | Error::Shape(_)
            | Error::NonFinite(_)
            | Error::DimensionMismatch { .. }
            | Error::ModelFormat(_)
            | Error::Frame(_) => ErrorClass::Schema,
            Error::SingleClass(_) | Error::TrainingDiverged(_) => ErrorClass::Training,
            Error::InvalidParameter(_) | Error::Empty(_) | Error::OutOfBounds { .. } | Error::Config(_) => {
                ErrorClass::Usage
            }
        }
    }
}
