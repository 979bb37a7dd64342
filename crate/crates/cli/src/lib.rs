//! Experiment runner for the plasma2d toolkit: configuration, shared
//! replica ensembles, the run registry and table export.

pub mod config;
pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod hashing;
pub mod registry;
pub mod runner;

pub use config::{ExperimentConfig, Kind};
pub use error::{Result, RunnerError};
pub use registry::{RunRecord, Status, Verdict};
pub use runner::{export, resume, run, ExportFormat, RunOptions};
