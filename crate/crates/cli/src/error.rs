use thiserror::Error;

/// Failure classes, one per process exit code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Statistics(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Parse(_) => 4,
            CliError::Statistics(_) => 5,
        }
    }

    pub(crate) fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<swpe_core::Error> for CliError {
    fn from(e: swpe_core::Error) -> Self {
        use swpe_core::Error as E;
        let msg = e.to_string();
        match e {
            E::InvalidArgument { .. } => CliError::Config(msg),
            E::Parse { .. } => CliError::Parse(msg),
            E::Io(_) => CliError::Io(msg),
            E::Undefined(_)
            | E::InsufficientCoincidences(_)
            | E::InsufficientStatistics(_)
            | E::Degenerate(_) => CliError::Statistics(msg),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
