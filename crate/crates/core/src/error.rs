use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid-point: cartesian position requested for an out-of-range point")]
    InvalidPoint,

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported model version `{0}`")]
    ModelVersion(String),

    #[error("no-normal: point has fewer than two mesh neighbours")]
    NoNormal,

    #[error("degenerate-normal: candidate normals cancel out")]
    DegenerateNormal,

    #[error("zero-length vector")]
    ZeroVector,

    #[error("empty segment")]
    EmptySegment,

    #[error("invalid scene: {0}")]
    Scene(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
