//! Experiment runner: config files, presets, sweeps with confidence
//! intervals, and CSV/JSON output.

pub mod config;
pub mod emit;
pub mod error;
pub mod experiment;
pub mod presets;

pub use config::{ExperimentConfig, Scenario, WorkloadSource};
pub use emit::{emit, Format};
pub use error::CliError;
pub use experiment::{run_experiment, Experiment, Summary, SweepResult};
pub use presets::{preset, PRESETS};
