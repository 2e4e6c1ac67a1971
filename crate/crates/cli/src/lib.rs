//! Configuration handling and the subcommands of the `cqs` tool.

pub mod commands;
pub mod config;

pub use config::{ConfigError, ExperimentConfig};

#[derive(Debug)]
pub enum AppError {
    Config(ConfigError),
    Core(cqs_core::Error),
    Io(std::io::Error),
}

impl From<ConfigError> for AppError {
    fn from(e: ConfigError) -> Self {
        AppError::Config(e)
    }
}

impl From<cqs_core::Error> for AppError {
    fn from(e: cqs_core::Error) -> Self {
        AppError::Core(e)
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Io(e)
    }
}

impl AppError {
    pub fn exit_code(&self) -> u8 {
        use cqs_core::Error as E;
        match self {
            AppError::Config(_) => 2,
            AppError::Io(_) => 1,
            AppError::Core(E::Io(_) | E::Json(_)) => 1,
            AppError::Core(E::InvalidSpin(_) | E::InvalidParameter(_) | E::WrongDrive { .. }) => 2,
            AppError::Core(_) => 3,
        }
    }
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AppError::Config(e) => write!(f, "configuration error: {e}"),
            AppError::Core(e) => write!(f, "{e}"),
            AppError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}
