use std::path::Path;

use thiserror::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_BAD_INPUT: u8 = 1;
pub const EXIT_INTERNAL: u8 = 2;
pub const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Debug, Error)]
pub enum Failure {
    #[error("{0}")]
    BadInput(String),
    #[error("internal consistency check failed: {0}")]
    Internal(String),
    #[error(transparent)]
    Core(#[from] threshrecon::Error),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl Failure {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Failure::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        use threshrecon::Error as E;
        match self {
            Failure::BadInput(_) | Failure::Io { .. } => EXIT_BAD_INPUT,
            Failure::Internal(_) => EXIT_INTERNAL,
            Failure::Core(E::EnergyIncrease { .. }) => EXIT_INTERNAL,
            Failure::Core(E::SweepNotConverged { .. }) => EXIT_NOT_CONVERGED,
            Failure::Core(_) => EXIT_BAD_INPUT,
        }
    }
}
