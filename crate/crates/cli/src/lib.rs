//! Experiment runner for the `edcnn` toolkit.
//!
//! A JSON [`ExperimentConfig`] names a network, a bank source and a list of
//! analyses. [`run`] executes them in order and returns a deterministic
//! [`Report`] plus wall-clock timings and CSV side files.

pub mod config;
pub mod render;
pub mod runner;

pub use config::{Analysis, BankSource, ExperimentConfig};
pub use runner::{run, Check, Report, RunOutput};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "EDCNN_OUT_DIR";

/// Exit status for usage and configuration errors.
pub const EXIT_USAGE: i32 = 1;
/// Exit status when an enforced check fails.
pub const EXIT_ASSERTION: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] edcnn::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
