//! Experiment workbench around `enn-core`: configuration, seeded sweeps
//! with CSV output, correlation analysis and compute accounting.

pub mod agents;
pub mod compute;
pub mod config;
pub mod correlate;
pub mod error;
pub mod experiments;
pub mod stats;
pub mod sweep;

pub use config::{Command, ExperimentConfig, Setting};
pub use error::{HarnessError, Result};
