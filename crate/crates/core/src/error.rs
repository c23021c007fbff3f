//! Error type shared by every module of the crate.

use std::path::PathBuf;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dataset state error: {0}")]
    State(String),

    #[error("error-reduction ratios undefined: weighted output energy is zero")]
    UndefinedRatios,

    #[error("r-squared undefined: observed values have zero variance")]
    UndefinedVariance,

    #[error("within-class covariance is singular at dimension {dimension}")]
    Singular { dimension: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("row {row}, column '{column}': cannot parse '{value}' as a finite decimal number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row} has {found} fields, header has {expected}")]
    RaggedRow {
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("duplicate column name '{0}'")]
    DuplicateColumn(String),

    #[error("column '{0}' not found")]
    MissingColumn(String),

    #[error("dataset is empty: {0}")]
    EmptyDataset(String),

    #[error("model file schema version {found} is not supported (expected {expected})")]
    SchemaVersion { found: u64, expected: u64 },

    #[error("corrupt model payload: {0}")]
    CorruptPayload(String),

    #[error("unknown benchmark kind '{0}'")]
    UnknownBenchmark(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
