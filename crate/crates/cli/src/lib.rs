//! Experiment orchestration for the `irsnoma` binary.

pub mod experiment;
pub mod spec;
pub mod summary;

pub use experiment::{read_records, run_cell, run_experiment, TrialRecord};
pub use spec::{ExperimentSpec, SweepVariable};
pub use summary::{summarize, to_csv, SummaryRow};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("spec: {0}")]
    Spec(String),

    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Core(#[from] irsnoma_core::Error),
}
