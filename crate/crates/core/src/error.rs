use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input component was not strictly positive, so the product units
    /// are undefined. Almost always means the data was not normalized.
    #[error("input {index} has non-positive value {value}; product units need x > 0")]
    Domain { index: usize, value: f64 },

    #[error("ingestion failed{}: {message}", row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    Ingestion { row: Option<usize>, message: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("worker {endpoint} failed: {message}")]
    Worker { endpoint: String, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Ingestion,
    Protocol,
    Precondition,
    Other,
}

impl Error {
    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub fn ingestion(row: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Ingestion {
            row,
            message: msg.into(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Ingestion { .. } => ErrorKind::Ingestion,
            Error::Protocol(_) | Error::Worker { .. } => ErrorKind::Protocol,
            Error::Precondition(_) | Error::Domain { .. } => ErrorKind::Precondition,
            Error::Io(_) | Error::Json(_) => ErrorKind::Other,
        }
    }
}
