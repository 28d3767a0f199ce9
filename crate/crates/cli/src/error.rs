use std::path::Path;

/// Failures surfaced to the command line, split by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad input or an unmet precondition (exit 2).
    #[error("{0}")]
    Input(String),
    /// Anything else, including failures writing outputs (exit 1).
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Internal(_) => 1,
        }
    }

    pub(crate) fn reading(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Input(format!("{}: {err}", path.display()))
    }

    pub(crate) fn writing(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Internal(format!("cannot write {}: {err}", path.display()))
    }
}

impl From<fuselect_core::Error> for CliError {
    fn from(err: fuselect_core::Error) -> Self {
        match err {
            fuselect_core::Error::Io(e) => CliError::Internal(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
