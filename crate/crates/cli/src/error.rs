use ftwist_core::Error;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidSpec(_) | Error::InvalidConfig(_) | Error::DimensionMismatch { .. } | Error::OrderOverflow { .. } => {
                CliError::Config(e.to_string())
            }
            Error::Domain(_) | Error::NonFinite | Error::Degenerate { .. } | Error::DegenerateFlag { .. } => {
                CliError::Domain(e.to_string())
            }
        }
    }
}
