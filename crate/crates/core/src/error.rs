use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, KacError>;

#[derive(Debug, Error)]
pub enum KacError {
    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("invalid law: {0}")]
    InvalidLaw(String),

    #[error("degree too small: n = {n}, need n >= {min}")]
    TooSmall { n: usize, min: usize },

    #[error("invalid exponent p = {0}, need p > 0")]
    InvalidExponent(f64),

    #[error("index {index} out of range 0..{len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("outside the bound's domain: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("scaling fit undefined: {0}")]
    FitUndefined(String),

    #[error("refusing run: {0}")]
    Guard(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl KacError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        KacError::Io {
            path: path.into(),
            source,
        }
    }
}
