use std::path::PathBuf;

use thiserror::Error;

use crate::design_space::PointViolation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid design space: {0}")]
    InvalidSpace(String),

    #[error("invalid point: {0}")]
    InvalidPoint(#[from] PointViolation),

    #[error("point {index} duplicates an existing design point")]
    DuplicatePoint { index: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The jittered Gram matrix could not be Cholesky-factored even at the
    /// largest allowed jitter.
    #[error("Gram matrix is not positive definite (jitter {jitter:e})")]
    FactorizationFailure { jitter: f64 },

    #[error("model fit failed: {0}")]
    FitFailure(String),

    #[error("no probe point lies within epsilon of the contour level")]
    EmptyContour,

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn data(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Data {
            path: path.into(),
            message: message.into(),
        }
    }
}
