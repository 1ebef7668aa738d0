//! Experiment orchestration: configuration, concurrent runs, trajectory
//! files, aggregation and held-out test evaluation.

mod aggregate;
mod config;
mod runner;
mod trajectory;

use std::path::PathBuf;

use thiserror::Error;

pub use aggregate::{aggregate_files, aggregate_trajectories, write_aggregate, AggregateRow};
pub use config::{Algorithm, ConfigOverrides, ExperimentConfig, ProblemKind};
pub use runner::{
    build_problem, evaluate_on_test, run_experiment, run_single, ExperimentReport, Manifest, RunSummary,
    MANIFEST_FILE,
};
pub use trajectory::{read_trajectory, trajectory_file_name, write_trajectory, TrajectoryRecord};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("no trajectory rows to aggregate")]
    EmptyInput,
    #[error("split does not match the run manifest: {0}")]
    SplitMismatch(String),
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        HarnessError::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
