use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

use super::{check_samples, train, RegressorConfig, RegressorKind, SurrogateError};

pub const CV_FOLDS: usize = 3;

/// Fold index of every sample: a seeded shuffle cut into contiguous,
/// nearly equal parts.
pub fn fold_assignment(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        folds[i] = pos * CV_FOLDS / n;
    }
    folds
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub best: RegressorConfig,
    /// Every evaluated grid point with its cross-validated mean squared error.
    pub candidates: Vec<(RegressorConfig, f64)>,
}

fn cv_error<F: Scalar>(
    config: &RegressorConfig,
    xs: &[Vec<F>],
    ys: &[F],
    folds: &[usize],
    seed: u64,
) -> Result<f64, SurrogateError> {
    let mut total = 0.0;
    for fold in 0..CV_FOLDS {
        let (mut tx, mut ty) = (Vec::new(), Vec::new());
        for ((x, &y), &f) in xs.iter().zip(ys).zip(folds) {
            if f != fold {
                tx.push(x.clone());
                ty.push(y);
            }
        }
        let model = train(config, &tx, &ty, seed)?;
        let (mut sse, mut count) = (0.0, 0usize);
        for ((x, &y), &f) in xs.iter().zip(ys).zip(folds) {
            if f == fold {
                let e = (model.predict(x)? - y).as_f64();
                sse += e * e;
                count += 1;
            }
        }
        total += sse / count as f64;
    }
    Ok(total / CV_FOLDS as f64)
}

/// Index of the smallest score; the earliest wins ties.
pub(crate) fn first_argmin(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s < scores[best] {
            best = i;
        }
    }
    best
}

/// Grid search over [`RegressorKind::grid`] by 3-fold cross-validation.
pub fn tune_hyperparameters<F: Scalar>(
    kind: RegressorKind,
    xs: &[Vec<F>],
    ys: &[F],
    seed: u64,
) -> Result<TuningReport, SurrogateError> {
    check_samples(xs, ys, CV_FOLDS)?;
    let folds = fold_assignment(xs.len(), seed);
    let grid = kind.grid();
    let mut candidates = Vec::with_capacity(grid.len());
    for config in grid {
        let score = cv_error(&config, xs, ys, &folds, seed)?;
        candidates.push((config, score));
    }
    let scores: Vec<f64> = candidates.iter().map(|(_, s)| *s).collect();
    let best = candidates[first_argmin(&scores)].0;
    Ok(TuningReport { best, candidates })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_are_balanced_and_seeded() {
        let f = fold_assignment(10, 3);
        let counts: Vec<usize> = (0..3).map(|k| f.iter().filter(|&&x| x == k).count()).collect();
        assert_eq!(counts.iter().sum::<usize>(), 10);
        assert!(counts.iter().all(|&c| c == 3 || c == 4));
        assert_eq!(f, fold_assignment(10, 3));
    }

    #[test]
    fn ties_go_to_grid_order() {
        assert_eq!(first_argmin(&[0.2, 0.1, 0.1]), 1);
        assert_eq!(first_argmin(&[0.1, 0.1]), 0);
    }

    #[test]
    fn needs_one_sample_per_fold() {
        let xs = vec![vec![0.0], vec![1.0]];
        assert_eq!(
            tune_hyperparameters::<f64>(RegressorKind::Svr, &xs, &[0.0, 1.0], 0),
            Err(SurrogateError::TooFewSamples { needed: 3, got: 2 })
        );
    }

    #[test]
    fn evaluates_whole_grid() {
        let xs: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i % 2) as f64, ((i / 2) % 2) as f64])
            .collect();
        let ys: Vec<f64> = xs.iter().map(|x| x[0] + 0.5 * x[1]).collect();
        let svr = tune_hyperparameters(RegressorKind::Svr, &xs, &ys, 1).unwrap();
        assert_eq!(svr.candidates.len(), 2);
        let rf = tune_hyperparameters(RegressorKind::RandomForest, &xs, &ys, 1).unwrap();
        assert_eq!(rf.candidates.len(), 18);
        let best_score = rf.candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        let first_best = rf.candidates.iter().find(|c| c.1 == best_score).unwrap().0;
        assert_eq!(rf.best, first_best);
    }
}
