use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure classes, used by the command line to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    DataContract,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("baseline hazard calibration failed: {0}")]
    Calibration(String),

    #[error("lexicon error in `{entry}`: {message}")]
    Lexicon { entry: String, message: String },

    #[error("schema mismatch in {table}: {message}")]
    Schema { table: String, message: String },

    #[error("data quality violation in {table} (row {row}): {message}")]
    DataQuality {
        table: String,
        row: usize,
        message: String,
    },

    #[error("cannot parse `{input}`: {message}")]
    Parse { input: String, message: String },

    #[error("Cox fit did not converge after {iterations} iterations (max |step| {last_step:.3e}, log-lik {loglik:.6})")]
    NonConvergence {
        iterations: usize,
        last_step: f64,
        loglik: f64,
    },

    #[error("singular information matrix; offending columns: {}", columns.join(", "))]
    Singular { columns: Vec<String> },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidParameter(_) | Error::Config { .. } => ErrorClass::Usage,
            Error::Calibration(_) | Error::NonConvergence { .. } | Error::Singular { .. } => {
                ErrorClass::Numerical
            }
            _ => ErrorClass::DataContract,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
