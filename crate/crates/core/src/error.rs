use std::path::PathBuf;

use crate::kinematics::LengthMismatch;
use crate::scene::DegenerateVertices;
use crate::se3::InvalidTransform;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Length(#[from] LengthMismatch),
    #[error("invalid transform: {0}")]
    Transform(#[from] InvalidTransform),
    #[error("degenerate vertex set: {0}")]
    Degenerate(#[from] DegenerateVertices),
    #[error("invalid model: {0}")]
    Model(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("repertoire is empty")]
    EmptyRepertoire,
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("unsupported format version {found} (supported: {supported})")]
    Version { found: u32, supported: u32 },
    #[error("{what} hash mismatch: file records {recorded}, model hashes to {actual}")]
    HashMismatch {
        what: &'static str,
        recorded: String,
        actual: String,
    },
    #[error("record {index}: {message}")]
    Record { index: usize, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
