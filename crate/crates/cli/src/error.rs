use kahler_core::KahlerError;
use thiserror::Error;

/// Errors that stop a scenario before any check report exists.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] KahlerError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    /// Process exit status: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(
                KahlerError::InvalidInput(_)
                | KahlerError::DimensionMismatch { .. }
                | KahlerError::NotKahler { .. },
            ) => 2,
            _ => 1,
        }
    }
}
