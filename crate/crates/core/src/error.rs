use thiserror::Error;

/// Errors produced by the model, simulator, estimators and fits.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("undefined quantity: {0}")]
    Undefined(String),

    #[error("insufficient coincidences: {0}")]
    InsufficientCoincidences(String),

    #[error("insufficient statistics: {0}")]
    InsufficientStatistics(String),

    #[error("degenerate fit: {0}")]
    Degenerate(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    pub(crate) fn arg(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    /// True for the counting-statistics failures an estimator can raise.
    pub fn is_statistical(&self) -> bool {
        matches!(
            self,
            Error::InsufficientCoincidences(_) | Error::InsufficientStatistics(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
