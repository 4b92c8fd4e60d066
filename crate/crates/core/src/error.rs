use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the synthesis library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),

    #[error("{path}: file is empty or has no header row")]
    EmptyFile { path: PathBuf },

    #[error("{path}: label column `{column}` not found in header")]
    MissingLabelColumn { path: PathBuf, column: String },

    #[error("{path}: non-numeric value `{value}` at row {row}, column `{column}`")]
    NonNumeric {
        path: PathBuf,
        row: usize,
        column: String,
        value: String,
    },

    #[error("{path}: row {row} has {found} fields, expected {expected}")]
    RaggedRow {
        path: PathBuf,
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    #[error("kernel system is not positive definite (ridge lambda {lambda})")]
    Factorization { lambda: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("class {0} has no training examples")]
    MissingClass(usize),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Input problems (bad files, bad flags) as opposed to infeasible privacy settings.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::MissingFile(_)
                | Error::EmptyFile { .. }
                | Error::MissingLabelColumn { .. }
                | Error::NonNumeric { .. }
                | Error::RaggedRow { .. }
                | Error::Schema(_)
                | Error::DimensionMismatch { .. }
                | Error::InvalidArgument(_)
                | Error::MissingClass(_)
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
