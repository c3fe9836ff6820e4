use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{0}")]
    Strict(String),

    #[error("malformed input: {0}")]
    Input(String),

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => 2,
            CliError::Strict(_) => 3,
            CliError::Input(_) => 4,
            CliError::Io(_) | CliError::Compute(_) => 1,
        })
    }
}
