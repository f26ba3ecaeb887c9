use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("non-finite value at index {index}")]
    Domain { index: usize },

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("{path}: {message} (at byte offset {offset})")]
    Load { path: PathBuf, offset: usize, message: String },

    #[error("weight file: {0}")]
    Weights(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl Error {
    /// Process exit status for command-line front ends: 2 for I/O, 4 for
    /// weight files, 3 for everything else (shapes, parameters, malformed
    /// images).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            Error::Weights(_) => 4,
            _ => 3,
        }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
