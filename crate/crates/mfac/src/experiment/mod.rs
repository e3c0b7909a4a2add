//! Experiment runner: configuration, presets, artifact files and sweeps.

pub mod config;
pub mod io;
pub mod runner;
pub mod sweep;

pub use config::{ExperimentConfig, InlineModel, ModelSpec, RatesConfig, RunMode};
pub use runner::{run, RunArtifacts, OUT_DIR_ENV};
pub use sweep::{sweep, sweep_file, CaseOutcome, SweepOutcome};
