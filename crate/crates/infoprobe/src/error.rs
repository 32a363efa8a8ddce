use std::path::PathBuf;
use std::process::ExitCode;

use thiserror::Error;

use crate::config::ConfigError;
use crate::dataio::DataError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),

    #[error("{0}")]
    Usage(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("format error: {0}")]
    Data(#[from] DataError),

    #[error("training failed: {0}")]
    Training(infoprobe_core::Error),

    #[error("bound violated: {0}")]
    BoundViolation(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 0 success, 1 i/o, 2 config/usage/contract (including a filter that
    /// would remove every class), 3 file format, 4 training failure,
    /// 5 bound violation.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Config(_) | CliError::Usage(_) | CliError::Contract(_) => 2,
            CliError::Data(e) if matches!(e.root(), DataError::Io(_)) => 1,
            CliError::Data(e) if matches!(e.root(), DataError::EmptyResult { .. }) => 2,
            CliError::Data(_) => 3,
            CliError::Training(_) => 4,
            CliError::BoundViolation(_) => 5,
        }
    }

    pub fn exit(&self) -> ExitCode {
        ExitCode::from(self.exit_code())
    }
}

impl From<infoprobe_core::Error> for CliError {
    fn from(e: infoprobe_core::Error) -> Self {
        use infoprobe_core::Error as E;
        match e {
            E::Contract(m) => CliError::Contract(m),
            E::Shape(m) => CliError::Contract(format!("shape mismatch: {m}")),
            other => CliError::Training(other),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
