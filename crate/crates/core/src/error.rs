use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected d = {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("point lies outside the prior support (l1 norm {l1_norm} > {radius})")]
    OutsideSupport { l1_norm: f64, radius: f64 },

    #[error("prior rejection budget of {attempts} draws exhausted; c1 too small relative to tau * d")]
    RejectionBudget { attempts: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("all cross-validation folds are degenerate (single-class training data)")]
    DegenerateFolds,

    #[error("csv parse error at row {row}, column {column:?}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical routines rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_) | Error::RejectionBudget { .. } | Error::OutsideSupport { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
