//! Experiment runner for `rwl-core`: configuration, stages and reports.

pub mod config;
pub mod run;
pub mod stages;

pub use config::{ConfigError, ExperimentConfig, SCHEMA};
pub use run::{run, RunError, RunOutcome};
pub use stages::{Check, Stage};
