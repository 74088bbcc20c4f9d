use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A token in an IMS text file is not a decimal number. `line` is zero-based.
    #[error("line {line}: cannot parse {token:?} as a number")]
    Parse { line: usize, token: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("size error: {0}")]
    Size(String),

    /// One entry per violated field.
    #[error("invalid configuration: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("duplicate timestamp {0} in recording names")]
    DuplicateTimestamp(String),

    #[error("numeric failure: {message} (residual {residual:e})")]
    Numeric { message: String, residual: f64 },

    #[error("t-SNE bandwidth search failed for point {index}: {message}")]
    Bandwidth { index: usize, message: String },

    #[error("stream out of order at index {index}: {message}")]
    Sequencing { index: usize, message: String },

    #[error("degenerate reference map: {0}")]
    DegenerateMap(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn size(msg: impl Into<String>) -> Self {
        Error::Size(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn invalid(field: impl Into<String>) -> Self {
        Error::Validation(vec![field.into()])
    }
}
