use thiserror::Error;

/// Errors surfaced by the library. The CLI maps these onto exit codes:
/// bad arguments and config problems -> 2, data/shape mismatches -> 3,
/// solver divergence -> 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("data mismatch: {0}")]
    DataMismatch(String),

    #[error("solver diverged at outer iteration {iter}: {reason}")]
    Diverged { iter: usize, reason: String },

    #[error("malformed file {path}: {reason}")]
    Format { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn mismatch(msg: impl Into<String>) -> Self {
        Error::DataMismatch(msg.into())
    }
}
