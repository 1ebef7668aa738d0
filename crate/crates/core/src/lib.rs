//! Gene-pool optimal mixing inside a parameter-less population pyramid, with
//! an optional surrogate model that decides which offspring deserve a real
//! (expensive) fitness evaluation.
//!
//! The main objective is the partition-based ensemble problem: a genotype of
//! length `l` assigns each of `l` training samples to one of `alpha`
//! subsets, one classifier is trained per subset and the ensemble's
//! validation accuracy is the fitness. Trap and one-max landscapes are
//! included for verification.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix the common `f64` instantiation.

pub mod baselines;
pub mod error;
pub mod genotype;
pub mod gom;
pub mod harness;
pub mod linkage;
pub mod problems;
pub mod pyramid;
pub mod scalar;
pub mod surrogate;

pub use baselines::{local_search, random_search, run_baseline, Baseline};
pub use error::{Error, Result};
pub use genotype::{
    evaluate_real, normalize_partition, EvalError, EvaluationLedger, FitnessFunction, FitnessKind, Gene,
    Genotype, ProblemSpec, RunObserver, Solution, Termination, TrajectoryPoint,
};
pub use gom::{compare_solutions, gom_improve, Evaluator, GomOutcome, RealEvaluator};
pub use linkage::{
    build_filtered_linkage_tree, build_linkage_tree, estimate_nmi_matrix, Fos, LinkageTree, NmiMatrix,
};
pub use pyramid::{
    p3_iteration, run, sa_evaluate, set_threshold, LambdaController, Pyramid, RunOutcome, RunSettings,
    SearchMode, SurrogateState,
};
pub use scalar::Scalar;
pub use surrogate::{FittedRegressor, RegressorConfig, RegressorKind};

pub type Solution64 = Solution<f64>;
pub type Solution32 = Solution<f32>;
pub type Ledger64 = EvaluationLedger<f64>;
pub type Ledger32 = EvaluationLedger<f32>;
pub type NmiMatrix64 = NmiMatrix<f64>;
pub type SurrogateState64 = SurrogateState<f64>;
pub type RunOutcome64 = RunOutcome<f64>;
pub type Pyramid64 = Pyramid<f64>;
