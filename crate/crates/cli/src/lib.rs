//! Experiment runner and command-line tools around the `ordembed` library.

pub mod config;
pub mod embed;
pub mod error;
pub mod experiment;
pub mod output;
pub mod plot;
pub mod summary;
pub mod tools;

pub use config::ExperimentConfig;
pub use error::CliError;
pub use experiment::{run_experiment, run_seed, write_artifacts, Experiment, SeedRun, SeedStatus, TraceRow};
