use std::path::PathBuf;

use ipp_tensor::TensorError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid position: {0}")]
    InvalidPosition(String),

    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("rejected step for agent {agent}: {reason}")]
    RejectedStep { agent: usize, reason: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("degenerate terrain: {0}")]
    DegenerateTerrain(String),

    #[error("training diverged in block {block}: {message}")]
    Divergence { block: usize, message: String },

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Tensor(#[from] TensorError),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for command-line use: 2 usage, 3 data, 4 divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Usage(_) | Error::Contract(_) => 2,
            Error::Parse { .. }
            | Error::Data(_)
            | Error::DegenerateTerrain(_)
            | Error::InvalidMeasurement(_)
            | Error::InvalidPosition(_)
            | Error::Domain(_)
            | Error::Io { .. } => 3,
            Error::Divergence { .. } | Error::Tensor(TensorError::Divergence(_)) => 4,
            Error::Tensor(TensorError::Shape(_)) => 2,
            Error::Tensor(_) | Error::RejectedStep { .. } => 1,
        }
    }
}
