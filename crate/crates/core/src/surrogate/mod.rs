//! Surrogate fitness regressors over one-hot encoded genotypes.
//!
//! Two model families are available: epsilon-SVR trained with SMO and a
//! bagged random forest of variance-reduction regression trees. Both are
//! reached through [`RegressorConfig`] / [`FittedRegressor`]; hyperparameters
//! are chosen once per run by [`tune_hyperparameters`].

mod forest;
mod svr;
mod tuning;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genotype::Genotype;
use crate::scalar::Scalar;

pub use forest::{ForestParams, RandomForest, RegressionTree, TreeNode};
pub use svr::{fit_svr, fit_svr_cached, KernelCache, SparseVector, SvrFit, SvrKernel, SvrModel, SvrParams};
pub use tuning::{fold_assignment, tune_hyperparameters, TuningReport, CV_FOLDS};

#[derive(Debug, Error, PartialEq)]
pub enum SurrogateError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("expected input of dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Concatenation of one block of length `alphabet` per gene with a single 1
/// at the gene's value.
pub fn one_hot_encode<F: Scalar>(genotype: &Genotype, alphabet: usize) -> Vec<F> {
    let mut out = vec![F::zero(); genotype.len() * alphabet];
    for (i, &g) in genotype.genes().iter().enumerate() {
        out[i * alphabet + g as usize] = F::one();
    }
    out
}

/// Inverse of [`one_hot_encode`]: the arg-max of every block.
pub fn one_hot_decode<F: Scalar>(encoded: &[F], alphabet: usize) -> Genotype {
    Genotype::new(
        encoded
            .chunks(alphabet)
            .map(|block| crate::problems::argmax_lowest(block) as crate::genotype::Gene)
            .collect(),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressorKind {
    Svr,
    #[serde(alias = "rf", alias = "random-forest")]
    RandomForest,
}

impl RegressorKind {
    /// Candidate configurations searched by [`tune_hyperparameters`], in
    /// tie-breaking order.
    pub fn grid(self) -> Vec<RegressorConfig> {
        match self {
            RegressorKind::Svr => [SvrKernel::Rbf, SvrKernel::Sigmoid]
                .into_iter()
                .map(|kernel| RegressorConfig::Svr(SvrParams::with_kernel(kernel)))
                .collect(),
            RegressorKind::RandomForest => {
                let mut grid = Vec::with_capacity(18);
                for min_samples_split in [1, 3, 10] {
                    for min_samples_leaf in [1, 3, 10] {
                        for ratio_features in [5.0 / 6.0, 1.0] {
                            grid.push(RegressorConfig::RandomForest(ForestParams {
                                num_trees: 10,
                                min_samples_split,
                                min_samples_leaf,
                                ratio_features,
                            }));
                        }
                    }
                }
                grid
            }
        }
    }
}

impl std::str::FromStr for RegressorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "svr" => Ok(RegressorKind::Svr),
            "rf" | "random_forest" | "random-forest" => Ok(RegressorKind::RandomForest),
            other => Err(format!("unknown surrogate kind {other:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegressorConfig {
    Svr(SvrParams),
    RandomForest(ForestParams),
}

impl RegressorConfig {
    pub fn kind(&self) -> RegressorKind {
        match self {
            RegressorConfig::Svr(_) => RegressorKind::Svr,
            RegressorConfig::RandomForest(_) => RegressorKind::RandomForest,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FittedRegressor<F> {
    /// All training targets were identical.
    Constant {
        value: F,
        dim: usize,
    },
    Svr(SvrModel<F>),
    Forest(RandomForest<F>),
}

impl<F: Scalar> FittedRegressor<F> {
    pub fn dim(&self) -> usize {
        match self {
            FittedRegressor::Constant { dim, .. } => *dim,
            FittedRegressor::Svr(m) => m.dim(),
            FittedRegressor::Forest(m) => m.dim(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, FittedRegressor::Constant { .. })
    }

    pub fn predict(&self, x: &[F]) -> Result<F, SurrogateError> {
        if x.len() != self.dim() {
            return Err(SurrogateError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(match self {
            FittedRegressor::Constant { value, .. } => *value,
            FittedRegressor::Svr(m) => m.predict(x),
            FittedRegressor::Forest(m) => m.predict(x),
        })
    }
}

fn check_samples<F: Scalar>(xs: &[Vec<F>], ys: &[F], needed: usize) -> Result<usize, SurrogateError> {
    assert_eq!(xs.len(), ys.len(), "one target per sample");
    if xs.len() < needed {
        return Err(SurrogateError::TooFewSamples {
            needed,
            got: xs.len(),
        });
    }
    let dim = xs[0].len();
    if let Some(bad) = xs.iter().find(|x| x.len() != dim) {
        return Err(SurrogateError::DimensionMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    Ok(dim)
}

fn constant_target<F: Scalar>(ys: &[F]) -> Option<F> {
    ys.iter().all(|&y| y == ys[0]).then(|| ys[0])
}

/// Fits the configured regressor. Identical targets produce a
/// [`FittedRegressor::Constant`] model predicting that value.
pub fn train<F: Scalar>(
    config: &RegressorConfig,
    xs: &[Vec<F>],
    ys: &[F],
    seed: u64,
) -> Result<FittedRegressor<F>, SurrogateError> {
    let dim = check_samples(xs, ys, 2)?;
    if let Some(value) = constant_target(ys) {
        return Ok(FittedRegressor::Constant { value, dim });
    }
    Ok(match config {
        RegressorConfig::Svr(params) => FittedRegressor::Svr(fit_svr(params, xs, ys).model),
        RegressorConfig::RandomForest(params) => {
            FittedRegressor::Forest(RandomForest::fit(params, xs, ys, seed))
        }
    })
}
