//! Experiment harness around `slq-core`: named recipes, a bounded worker
//! pool with schedule-independent output, and CSV/SVG emission.

// `!(x > 0.0)` is deliberate: it rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod pool;
pub mod recipes;
pub mod report;

pub use config::{ExperimentConfig, Recipe, SourceSpec};
pub use recipes::run_experiment;
pub use report::ExperimentReport;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] slq_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("worker pool: {0}")]
    Pool(String),
}
