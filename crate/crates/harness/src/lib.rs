//! Synthetic benchmarks, corruption protocols, metrics and experiment
//! orchestration around `kphd-core`.

pub mod clustering;
pub mod config;
pub mod corrupt;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod synthetic;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
