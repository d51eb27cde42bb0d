//! Experiment runner for the interpolation benchmarks and the inverse
//! Burgers problem. Each run reads a flat config, trains, and writes CSV
//! artifacts plus a JSON manifest into its output directory.

pub mod config;
pub mod manifest;
pub mod run;
pub mod suite;

use thiserror::Error;

pub use config::{ExperimentConfig, RawConfig, Task};
pub use manifest::RunManifest;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const TRAINING: i32 = 3;
}

/// The configuration cannot be run as written.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("{0}")]
pub struct ConfigError(pub String);

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] powernet::Error),
    #[error("{0}")]
    Output(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => exit::CONFIG,
            _ => exit::OTHER,
        }
    }
}
