use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// The variants fall into three families that the command line maps onto
/// exit codes: configuration/parameter problems, data problems (files,
/// shapes, formats) and compute failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("corrupt file {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },

    #[error("unsupported format: {0}")]
    Format(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("compute error: {0}")]
    Compute(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Compute,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Parameter(_) | Error::Config(_) => ErrorClass::Config,
            Error::Shape(_)
            | Error::Corrupt { .. }
            | Error::Format(_)
            | Error::Contract(_)
            | Error::Io { .. }
            | Error::Json(_) => ErrorClass::Data,
            Error::Generation(_) | Error::Training(_) | Error::Compute(_) => ErrorClass::Compute,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
