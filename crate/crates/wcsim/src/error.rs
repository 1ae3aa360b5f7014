//! Error taxonomy shared across the simulator.

use thiserror::Error;

/// Simulation error, grouped by the CLI exit-code category it maps to.
#[derive(Debug, Error)]
pub enum SimError {
    /// Invalid or inconsistent configuration (dimension mismatches, bad
    /// ranges, missing fields). CLI exit code 2.
    #[error("configuration error: {0}")]
    Config(String),

    /// Numerical failure inside a solver or factorization. CLI exit code 3.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Superframe construction could not place a flow. CLI exit code 3.
    #[error("scheduling error: {0}")]
    Scheduling(String),

    /// Filesystem failure while writing run artifacts. CLI exit code 4.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;

impl SimError {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Config(_) => 2,
            SimError::Numerical(_) | SimError::Scheduling(_) => 3,
            SimError::Io(_) => 4,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        SimError::Config(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        SimError::Numerical(msg.into())
    }

    pub fn scheduling(msg: impl Into<String>) -> Self {
        SimError::Scheduling(msg.into())
    }
}
