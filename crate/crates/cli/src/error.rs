use r2unet::train::FitError;
use r2unet::Error;

use crate::config::ConfigError;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const DATA: i32 = 3;
    pub const NUMERIC: i32 = 4;
    pub const IO: i32 = 5;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("usage: {0}")]
    Usage(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::Other(e) => e.into(),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => exit::CONFIG,
            CliError::Numeric(_) => exit::NUMERIC,
            CliError::Core(e) => match e {
                Error::InvalidArgument(_) => exit::CONFIG,
                Error::Data(_)
                | Error::Ingest(_)
                | Error::Indivisible { .. }
                | Error::Dimension { .. }
                | Error::Shape { .. }
                | Error::OddExtent { .. } => exit::DATA,
                Error::NonFinite { .. } | Error::NonDeterministic { .. } | Error::MissingGradient { .. } => {
                    exit::NUMERIC
                }
                Error::Format(_) | Error::Io(_) => exit::IO,
                _ => exit::OTHER,
            },
        }
    }
}
