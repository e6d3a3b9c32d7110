use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("training data contains a single class ({0})")]
    SingleClass(String),

    #[error("solver did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("split error: {0}")]
    Split(String),

    #[error("pool error: {0}")]
    Pool(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag used in the CLI's error record.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::Schema(_) => "schema",
            Error::Parameter(_) => "parameter",
            Error::Input(_) => "input",
            Error::Dimension { .. } => "dimension",
            Error::SingleClass(_) => "single_class",
            Error::NotConverged { .. } => "not_converged",
            Error::Split(_) => "split",
            Error::Pool(_) => "pool",
            Error::Metric(_) => "metric",
            Error::Config(_) => "config",
            Error::Json(_) => "json",
        }
    }
}

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension { expected, actual })
    }
}
