use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("degenerate retraction step: smallest singular value {0:e} below threshold")]
    DegenerateStep(f64),

    #[error("degenerate projector batch: concatenated columns are rank deficient")]
    DegenerateBatch,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid value for `{key}`: {reason}")]
    InvalidKey { key: String, reason: String },

    #[error("divergence at iteration {iteration}: particle coordinates non-finite or overflowing")]
    Divergence { iteration: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err(what: impl Into<String>) -> Error {
    Error::Dimension(what.into())
}
