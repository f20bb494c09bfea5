use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite: pivot {pivot:e} at index {index}")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("inverse residual {residual:e} is not below tolerance {tolerance:e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },

    #[error("cosine similarity {value} lies outside [-1, 1] beyond the clamp band")]
    Domain { value: f64 },

    #[error("input row {row} has zero norm and cannot be normalised")]
    ZeroInputRow { row: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("bad IDX magic: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { expected: u32, found: u32 },

    #[error("truncated IDX file: header declares {expected} bytes, payload holds {actual}")]
    TruncatedFile { expected: usize, actual: usize },

    #[error("label {value} at index {index} is outside 0..=9")]
    LabelOutOfRange { index: usize, value: u8 },

    #[error("requested {requested} examples but only {available} are available")]
    InsufficientData { requested: usize, available: usize },

    #[error("dataset file not found: {}", path.display())]
    DatasetNotFound { path: PathBuf },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable code, used by the CLI and the Python bindings.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NotPositiveDefinite { .. } => "NOT_POSITIVE_DEFINITE",
            Error::ResidualTooLarge { .. } => "RESIDUAL_TOO_LARGE",
            Error::Domain { .. } => "DOMAIN_ERROR",
            Error::ZeroInputRow { .. } => "ZERO_INPUT_ROW",
            Error::DimensionMismatch(_) => "DIMENSION_MISMATCH",
            Error::InvalidArgument(_) => "INVALID_ARGUMENT",
            Error::BadMagic { .. } => "BAD_MAGIC",
            Error::TruncatedFile { .. } => "TRUNCATED_FILE",
            Error::LabelOutOfRange { .. } => "LABEL_OUT_OF_RANGE",
            Error::InsufficientData { .. } => "INSUFFICIENT_DATA",
            Error::DatasetNotFound { .. } => "DATASET_NOT_FOUND",
            Error::Io(_) => "IO_ERROR",
        }
    }
}
