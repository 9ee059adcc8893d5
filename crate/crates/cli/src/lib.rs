//! Experiment runner: datasets, training, evaluation and the theory suites.

pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod plot;
pub mod replication;
pub mod snapshot;
pub mod train;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};

use closure_lab::theorylab::{Suite, SuiteReport};
use std::path::Path;

/// Runs one theory suite; failing checks become [`CliError::ChecksFailed`]
/// after the report has been written.
pub fn theory(suite: &str, seed: u64, out: Option<&Path>) -> Result<SuiteReport> {
    let suite: Suite = suite
        .parse()
        .map_err(|e: closure_lab::Error| CliError::Usage(e.to_string()))?;
    let report = suite.run(seed)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let p = dir.join(format!("theory_{}.txt", suite.name()));
        std::fs::write(&p, report.to_text()).map_err(|e| CliError::io(&p, e))?;
    }
    Ok(report)
}
