//! File formats, experiment orchestration and the command-line interface
//! around `qroute-core`.
//!
//! - [`config`]: JSON experiment configs with path-qualified schema errors
//! - [`checkpoint`]: versioned binary container for GNN parameters
//! - [`experiment`]: paired sweeps over approaches and the comparison report
//! - [`output`]: `metrics.csv`, `report.json`, `events.ndjson`, `train_log.csv`
//! - [`linkbudget`]: link success tables for parameter sweeps
//! - [`cli`]: the `qroute` binary

pub mod approach;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod experiment;
pub mod linkbudget;
pub mod output;

pub use approach::Approach;
pub use config::{Config, ConfigError};
pub use experiment::{ComparisonReport, ExperimentError};
