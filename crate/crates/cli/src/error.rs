use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numeric failure: {0}")]
    Numeric(subadd::Error),

    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl From<subadd::Error> for CliError {
    fn from(e: subadd::Error) -> Self {
        match e {
            subadd::Error::InvalidParameter(_)
            | subadd::Error::Parse(_)
            | subadd::Error::DimensionMismatch { .. } => CliError::Config(e.to_string()),
            other => CliError::Numeric(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) | CliError::Io { .. } => ExitCode::from(2),
            CliError::Numeric(_) => ExitCode::from(3),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
