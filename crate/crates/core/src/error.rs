use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("invalid UTF-8: {0}")]
    Utf8(String),
    #[error("split needs {required} examples but the dataset has {available}")]
    InfeasibleSplit { required: usize, available: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite log-likelihood {0}")]
    NonFinite(f64),
    #[error("example {0} has no gold form")]
    MissingGold(usize),
    #[error("degenerate correlation input: {0}")]
    Degenerate(String),
    #[error("protocol violation at row {row}: {reason}")]
    Protocol { row: usize, reason: String },
    #[error("learner failed: {0}")]
    Learner(String),
    #[error("learner timed out after {0} s")]
    Timeout(u64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
