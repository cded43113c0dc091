use thiserror::Error;

/// Errors produced by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("node index {index} out of bounds for n = {n}")]
    Bounds { index: usize, n: usize },

    #[error("{0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("target degree {target} is unreachable (at most {max} for this model)")]
    InfeasibleDegree { target: f64, max: f64 },

    #[error("every candidate is identically zero on the hold-out set")]
    DegenerateGram,

    #[error("AUC is undefined when the labels contain a single class")]
    UndefinedAuc,

    #[error("invalid format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
