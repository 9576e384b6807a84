use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// The data carry no information for the requested computation
    /// (all-zero regressors, constant residuals, zero variance, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("{engine}: {rejected} of {attempted} replicates rejected ({reason})")]
    Rejection {
        engine: &'static str,
        rejected: usize,
        attempted: usize,
        reason: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed CSV {path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short machine-readable tag, used by the CLI's error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::EmptyInput(_) => "empty_input",
            Error::Degenerate(_) => "degenerate",
            Error::Solver(_) => "solver",
            Error::Rejection { .. } => "rejection",
            Error::Config(_) => "config",
            Error::Csv { .. } => "csv",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
