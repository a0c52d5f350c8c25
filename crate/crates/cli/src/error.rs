use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

/// Process exit codes.
pub mod exit {
    pub const CONFIG: u8 = 2;
    pub const NOT_CONVERGED: u8 = 3;
    pub const IO: u8 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    NotConverged(String),
    #[error(transparent)]
    Core(#[from] hetsim_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use hetsim_core::Error as E;
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::NotConverged(_) => exit::NOT_CONVERGED,
            CliError::Core(e) if e.is_io() => exit::IO,
            CliError::Core(E::NonFinite { .. }) => exit::NOT_CONVERGED,
            CliError::Core(_) => exit::CONFIG,
        }
    }
}

pub fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}
