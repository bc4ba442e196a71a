//! Experiment runners, configuration and reports for the `eqz` binary.

pub mod config;
pub mod error;
pub mod report;
pub mod runners;

pub use config::ExperimentConfig;
pub use error::{LabError, Result};
pub use report::{Claim, ExperimentReport};
pub use runners::{run, Command};
