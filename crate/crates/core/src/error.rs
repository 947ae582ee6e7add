use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("diagonal entry {index} must be strictly positive, found {value}")]
    NonPositiveDiagonal { index: usize, value: f64 },

    #[error("column {column} has zero variance after centering")]
    DegenerateColumn { column: usize },

    #[error("no positive root for diagonal coordinate {index}")]
    NoPositiveRoot { index: usize },

    #[error("degenerate curvature {value} for off-diagonal coordinate {index}")]
    DegenerateCurvature { index: usize, value: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("malformed CSV at row {row}, column {column}: {message}")]
    Csv {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("malformed file {path}: {message}")]
    MalformedFile { path: PathBuf, message: String },

    #[error("every hyperparameter tuple failed to fit")]
    AllFitsFailed,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
