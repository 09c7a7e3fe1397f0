use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("expected a {expected} channel model, got {found}")]
    ModelKind {
        expected: &'static str,
        found: &'static str,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numerical consistency check failed: {0}")]
    Numerical(String),

    #[error("grid resolution too coarse: {0}")]
    Resolution(String),

    #[error("malformed bubble: {0}")]
    MalformedBubble(String),

    #[error("degenerate comparison: {0}")]
    Degenerate(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
