//! Crate-wide error type.

use std::path::{Path, PathBuf};

/// Unified error for every fallible operation in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A file could not be read or written.
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A catalog, benchmark, index, or log file failed to parse.
    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Structurally valid input violated a semantic rule.
    #[error("validation error: {0}")]
    Validation(String),

    /// Configuration or usage is missing, malformed, or out of range.
    #[error("config error: {0}")]
    Config(String),

    /// An embedding backend failed or does not match an index.
    #[error("embedder error: {0}")]
    Embedder(String),

    /// A policy backend failed to produce a completion.
    #[error("policy error: {0}")]
    Policy(String),

    /// The database engine failed outside the sandboxed query path.
    #[error("database error: {0}")]
    Database(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub(crate) fn parse(path: impl AsRef<Path>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.as_ref().to_path_buf(),
            line,
            message: message.into(),
        }
    }
}
