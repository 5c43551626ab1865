//! Scenario runner for SNAP gate studies.
//!
//! A run resolves a [`ScenarioConfig`], evaluates one [`Scenario`] on a
//! worker pool and writes CSV/JSON artifacts plus a `manifest.json` with
//! SHA-256 checksums. Identical configurations give byte-identical bundles.

use std::path::PathBuf;

use snap_core::SnapError;
use thiserror::Error;

pub mod config;
pub mod output;
pub mod scenarios;

pub use config::{resolve, InterferenceConfig, ScenarioConfig, WignerConfig};
pub use output::{write_bundle, Artifacts};
pub use scenarios::{run_scenario, Scenario};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: String, reason: String },

    #[error(transparent)]
    Core(SnapError),

    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("worker pool: {0}")]
    Pool(String),
}

impl CliError {
    /// Offending configuration field, if any.
    pub fn field(&self) -> Option<&str> {
        match self {
            CliError::Config { field, .. } => Some(field),
            _ => None,
        }
    }
}

impl From<SnapError> for CliError {
    fn from(e: SnapError) -> Self {
        match e {
            SnapError::Config { field, reason } => CliError::Config { field, reason },
            other => CliError::Core(other),
        }
    }
}

/// Runs `scenario` and writes its bundle to `config.out`.
pub fn run_and_write(scenario: Scenario, config: &ScenarioConfig) -> Result<Artifacts, CliError> {
    let artifacts = run_scenario(scenario, config)?;
    write_bundle(&config.out, scenario.name(), config, &artifacts)?;
    Ok(artifacts)
}
