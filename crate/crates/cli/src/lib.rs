//! Command-line harness: configuration, on-disk artifacts and the pipeline
//! verbs behind the `ssagcn` binary.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;
pub mod results;
pub mod variant;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
