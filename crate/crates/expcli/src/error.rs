use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("guard exceeded: {0}")]
    Guard(String),
    #[error(transparent)]
    Core(herald_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("render error: {0}")]
    Render(String),
}

impl CliError {
    /// 2 for bad input, 3 for guards, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Guard(_) => 3,
            CliError::Core(_) | CliError::Io { .. } | CliError::Render(_) => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

impl From<herald_core::Error> for CliError {
    fn from(e: herald_core::Error) -> Self {
        use herald_core::Error as E;
        match e {
            E::GuardExceeded(m) => CliError::Guard(m),
            E::Parse(_)
            | E::Unresolvable(_)
            | E::InvalidGame(_)
            | E::InvalidChannel(_)
            | E::InvalidShape(_)
            | E::InvalidState(_)
            | E::DimensionMismatch(_)
            | E::OutOfRange(_)
            | E::LabelCollision(_)
            | E::Overlap(_)
            | E::IndexOutOfRange { .. }
            | E::EmptySelection => CliError::Config(e.to_string()),
            other => CliError::Core(other),
        }
    }
}
