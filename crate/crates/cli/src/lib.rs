//! Experiment runner for displacement-reshaped optimal transport: configuration,
//! the benchmark protocols, result tables, figures and the run manifest.

pub mod classify;
pub mod config;
pub mod error;
pub mod experiments;
pub mod methods;
pub mod output;
pub mod results;
pub mod svg;

use std::path::PathBuf;

pub use config::{ExperimentConfig, ExperimentKind, KernelChoice, MethodSpec};
pub use error::CliError;
pub use output::RunOutput;

/// Runs the configured experiment and writes every output file.
pub fn run(config: &ExperimentConfig) -> Result<(RunOutput, Vec<PathBuf>), CliError> {
    config.validate()?;
    let out = experiments::run_experiment(config)?;
    let files = output::emit_outputs(config, &out)?;
    Ok((out, files))
}
