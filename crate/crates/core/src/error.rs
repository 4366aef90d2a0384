use thiserror::Error;

pub type Result<T, E = NortError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum NortError {
    /// Dimensions of two operands disagree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An index fell outside its tensor. Indices in the message are 1-based.
    #[error("index out of range: {0}")]
    Range(String),

    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Iterative linear algebra failed to reach its tolerance.
    #[error("numerical failure: {message}")]
    Numerical { message: String, residual: f64 },

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl NortError {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        NortError::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        NortError::Config(msg.into())
    }

    pub(crate) fn parse(offset: usize, msg: impl Into<String>) -> Self {
        NortError::Parse {
            offset,
            message: msg.into(),
        }
    }
}
