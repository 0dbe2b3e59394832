use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value for parameter `{param}`: {reason}")]
    Validation { param: String, reason: String },

    #[error("invalid search space: {0}")]
    Space(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("objective evaluation failed: {0}")]
    Objective(String),

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn validation(param: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            param: param.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
