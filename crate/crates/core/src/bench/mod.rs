//! Benchmark harness behind the `ann-bench` binary.

pub mod config;
pub mod experiment;
pub mod report;
pub mod selftest;
pub mod split;

pub use config::{load_config, parse_config, ExperimentConfig, Method};
pub use experiment::{run_all, run_experiment, run_on_dataset};
pub use report::{emit_report, read_report, smooth_over_k, summary_table, AccuracyRecord, RepetitionResult};
