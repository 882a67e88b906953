use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error("{path}: line {line}, column `{column}`: non-numeric value `{value}`")]
    NonNumeric {
        path: String,
        line: u64,
        column: String,
        value: String,
    },

    #[error("{path}: line {line}, column `{column}`: non-finite value `{value}`")]
    NonFinite {
        path: String,
        line: u64,
        column: String,
        value: String,
    },

    #[error("{path}: line {line}: duplicate id `{id}`")]
    DuplicateId { path: String, line: u64, id: String },

    #[error("{0}: missing `label` column")]
    MissingLabels(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("insufficient data: need at least {needed} rows, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "covariance is not positive definite at shrinkage {shrinkage}; increase the shrinkage weight"
    )]
    NotPositiveDefinite { shrinkage: f64 },

    #[error("non-finite loss ({0}); training diverged")]
    NonFiniteLoss(f64),

    #[error("unknown id `{0}`")]
    UnknownId(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, got })
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
