use swd_core::SwdError;
use thiserror::Error;

use crate::config::Origin;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}", parse_message(.key, .origin, .message))]
    Parse {
        key: Option<String>,
        origin: Origin,
        message: String,
    },

    #[error("nothing to report: {0}")]
    Empty(String),

    #[error(transparent)]
    Core(#[from] SwdError),

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

fn parse_message(key: &Option<String>, origin: &Origin, message: &str) -> String {
    match key {
        Some(k) => format!("config error in `{k}` ({origin}): {message}"),
        None => format!("config error ({origin}): {message}"),
    }
}

impl CliError {
    pub fn parse(key: Option<&str>, origin: Origin, message: impl Into<String>) -> Self {
        CliError::Parse {
            key: key.map(str::to_string),
            origin,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse { .. } => 2,
            CliError::Empty(_) | CliError::Core(SwdError::NoQualifier { .. }) => 3,
            CliError::Core(SwdError::NonEstimable(_)) => 4,
            _ => 1,
        }
    }
}
