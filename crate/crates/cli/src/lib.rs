//! Experiment runner for hidden convex-concave games.
//!
//! Configs are versioned JSON documents; every run writes a trajectory CSV
//! and a summary JSON checked against an embedded schema. The `hcc` binary is
//! a thin clap front end over the functions here.

pub mod audit;
pub mod config;
pub mod gan;
pub mod output;
pub mod presets;
pub mod simulate;
pub mod summary;
pub mod sweep;

use std::path::{Path, PathBuf};

use hcc_core::gan_solutions::GanError;
use hcc_core::LyapunovError;
use thiserror::Error;

use config::{ConfigError, ExperimentConfig};
use output::OutputError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("summary failed schema validation: {0}")]
    Summary(String),
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Gan(#[from] GanError),
    #[error(transparent)]
    Lyapunov(#[from] LyapunovError),
    #[error("{0}")]
    InvalidArgument(String),
}

impl CliError {
    /// Process exit status: 2 for bad input, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::InvalidArgument(_) | CliError::Io { .. } => 2,
            _ => 1,
        }
    }
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Loads a config from a file, or from a built-in preset when `arg` names
/// one and no such file exists. `seed_override` is the `HCC_SEED` value.
pub fn load_config(arg: &str, seed_override: Option<&str>) -> Result<ExperimentConfig, CliError> {
    let path = Path::new(arg);
    let text = match (path.exists(), presets::get(arg)) {
        (false, Some(text)) => text.to_string(),
        _ => read_text(path)?,
    };
    let mut cfg = config::parse_config(&text)?;
    config::apply_seed_override(&mut cfg, seed_override)?;
    Ok(cfg)
}
