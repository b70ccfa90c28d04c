use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("graph construction: {0}")]
    Construction(String),

    #[error("invalid value: {0}")]
    Validation(String),

    #[error("degenerate split: sparse graph has no facts left")]
    DegenerateSplit,

    #[error("split integrity violated: {0}")]
    Integrity(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("training diverged at epoch {epoch}: {message}")]
    Training { epoch: usize, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("incompatible vocabulary: {0}")]
    Incompatible(String),

    #[error("query error: {0}")]
    Query(String),

    #[error("action error: {0}")]
    Action(String),

    #[error("horizon error: {0}")]
    Horizon(String),

    #[error("missing score for {0}")]
    MissingScore(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}
