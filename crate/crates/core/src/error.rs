use thiserror::Error;

use crate::harness::HarnessError;
use crate::problems::ProblemError;
use crate::surrogate::SurrogateError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid problem specification: {0}")]
    InvalidSpec(String),
    #[error("invalid genotype: {0}")]
    InvalidGenotype(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("fitness function returned a non-finite value for {0}")]
    NonFiniteFitness(String),
    #[error("population is empty")]
    EmptyPopulation,
    #[error("surrogate archive is empty")]
    EmptyArchive,
    #[error("solution is missing the {0} fitness required for comparison")]
    MissingFitness(&'static str),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}
