use std::io;

use thiserror::Error;

/// Errors produced anywhere in the crate.
///
/// Variants follow the failure classes callers need to tell apart: bad
/// arguments to a single call, invalid configuration, numeric breakdown,
/// structural preconditions on Markov chains, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("chain structure error: {0}")]
    Structure(String),
    #[error("chain did not mix within {cap} steps")]
    NonMixing { cap: usize },
    #[error("state error: {0}")]
    State(String),
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("blob error: {0}")]
    Blob(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) => 2,
            Error::Numeric(_) => 3,
            _ => 1,
        }
    }
}
