//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failures surfaced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Two objects that must share a dimension do not.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    /// Aligned sequences have different lengths.
    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),
    /// A covariance failed its Cholesky factorization.
    #[error("matrix is not positive definite ({0})")]
    NotPositiveDefinite(String),
    /// Argument outside the documented domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Caller supplied an invalid argument or configuration value.
    #[error("invalid argument: {0}")]
    Invalid(String),
    /// A numerical routine failed to produce a finite answer.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Configuration file could not be interpreted.
    #[error("config error: {0}")]
    Config(String),
    /// Filesystem error, with the offending path.
    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// CSV failure at `path`: I/O problems keep their path, anything else is
    /// invalid data.
    pub(crate) fn csv(path: impl AsRef<std::path::Path>, e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Invalid(format!("{}: {other:?}", path.as_ref().display())),
        }
    }

    /// Process exit code for this failure: 2 for configuration problems, 3 for
    /// numerical ones, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Invalid(_) | Error::Json(_) => 2,
            Error::NotPositiveDefinite(_) | Error::Numerical(_) | Error::Domain(_) => 3,
            _ => 1,
        }
    }
}
