use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("mesh has no faces")]
    EmptyMesh,

    #[error("mesh has zero total area")]
    DegenerateMesh,

    #[error("invalid face {face}: {reason}")]
    InvalidFace { face: usize, reason: String },

    #[error("query on an empty point set")]
    EmptyPointSet,

    #[error("decomposition covers {decomposition} sites but {sites} sites were supplied")]
    SiteCountMismatch { decomposition: usize, sites: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
