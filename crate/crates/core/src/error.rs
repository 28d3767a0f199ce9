use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// The score-file header does not match the expected schema.
    #[error("schema error: missing column `{column}`")]
    Schema { column: String },

    /// A data row could not be accepted. `line` is 1-based and counts the header.
    #[error("rejected row at line {line}: {reason}")]
    RejectedRow { line: u64, reason: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("generation error: {0}")]
    Generation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
