//! Experiment runner for biased walks on random-walk ranges: configuration,
//! Monte Carlo experiments and their CSV / JSON-lines reports.

pub mod config;
pub mod error;
pub mod experiments;
pub mod report;
pub mod stats;
pub mod verbs;

pub use config::{ExperimentConfig, Format, Model};
pub use error::{HarnessError, Result};
