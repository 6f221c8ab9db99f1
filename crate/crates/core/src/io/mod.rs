//! Configuration, persistence formats and the experiment runner.

pub mod config;
pub mod run;
pub mod snapshot;
pub mod tables;

pub use config::{parse_config, Experiment, RunConfig};
pub use run::{run_experiment, write_failure, RunSummary};
pub use snapshot::{read_snapshot, write_snapshot, SnapshotHeader};
