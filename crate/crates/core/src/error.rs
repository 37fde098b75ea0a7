use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Points or centers of differing dimension were mixed in one call.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Shape { expected: usize, found: usize },

    /// The call violated a documented precondition (empty solution, unknown id, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// A configuration value is out of range.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A fixed-shape structure drifted too far from its sizing hint.
    #[error("rebuild required: size {size} outside the range allowed by n_hint = {n_hint}")]
    RebuildRequired { size: usize, n_hint: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
