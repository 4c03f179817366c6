use std::path::PathBuf;

use thiserror::Error;

/// Errors shared by every stage of the pipeline.
#[derive(Debug, Error)]
pub enum NavError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible goal: {0}")]
    InfeasibleGoal(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl NavError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        NavError::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        NavError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        NavError::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = NavError> = std::result::Result<T, E>;
