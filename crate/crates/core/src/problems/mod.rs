//! Objective functions: the partition-based ensemble fitness with its dataset
//! handling, and synthetic landscapes used for verification.

mod dataset;
mod learner;
mod partition;
mod synthetic;

use thiserror::Error;

pub use dataset::{
    load_and_split, load_dataset, read_dataset, synthetic_classification, write_dataset_csv, Dataset,
    SplitSpec, Splits,
};
pub use learner::{Learner, LogisticModel, LogisticRegression};
pub use partition::{argmax_lowest, partition_fitness, single_learner_accuracy, PartitionProblem};
pub use synthetic::{categorical_onemax_fitness, trap_fitness, CategoricalOnemax, Trap};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("cannot read dataset {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("dataset parse error at record {record}: {message}")]
    Parse { record: usize, message: String },
    #[error("dataset has {available} samples, {needed} required")]
    TooFewSamples { needed: usize, available: usize },
    #[error("partition leaves every subset empty")]
    NoTrainingData,
    #[error("block size {block_size} does not divide genotype length {len}")]
    BadBlockSize { block_size: usize, len: usize },
    #[error("problem kind does not match the objective")]
    KindMismatch,
}
