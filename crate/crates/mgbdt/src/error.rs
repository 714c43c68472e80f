//! Error type shared across the crate.

use thiserror::Error;

/// Errors surfaced by training, data handling, and persistence.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("non-finite input")]
    NonFiniteInput,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("inverse not yet trained for layer {0}")]
    InverseNotTrained(usize),

    #[error("no inverse for linear top layer")]
    NoInverseForLinearTop,

    #[error("layer index {index} out of range (valid range 0..={max})")]
    LayerOutOfRange { index: usize, max: usize },

    #[error("unknown label column `{0}`")]
    UnknownLabelColumn(String),

    #[error("cannot parse `{value}` as a number at row {row}, column `{column}`")]
    NumericParse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u32),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    ModelFormat {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
