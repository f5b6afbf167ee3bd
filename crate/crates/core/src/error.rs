use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),

    #[error("requested {requested} components but the data only supports rank {rank}")]
    RankExceeded { requested: usize, rank: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error in {path} at row {row}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("non-finite objective after {iterations} iterations")]
    NonFiniteObjective {
        iterations: usize,
        last_valid: Vec<f64>,
    },

    #[error("horizon {0} exceeds the exhaustive planning limit")]
    HorizonTooLarge(usize),

    #[error("planning budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("teacher failed: {0}")]
    Teacher(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
