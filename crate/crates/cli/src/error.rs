use thiserror::Error;

use homodyne_core::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("provenance error: {0}")]
    Provenance(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Provenance(_) => 5,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::Domain(_) | CoreError::Empty(_) => CliError::Config(msg),
            CoreError::Io(_) | CoreError::Json(_) | CoreError::Format(_) => CliError::Io(msg),
            CoreError::Numerical { .. } | CoreError::Range(_) | CoreError::Envelope { .. } => {
                CliError::Numerical(msg)
            }
            CoreError::Mismatch(_) => CliError::Provenance(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
