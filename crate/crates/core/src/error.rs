use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// A line-oriented input could not be decoded.
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Graph construction found references it could not resolve.
    #[error("graph build aborted: {}", .0.join("; "))]
    Build(Vec<String>),

    #[error("snapshot error: {0}")]
    Snapshot(String),
}
