//! Epsilon-insensitive support vector regression solved by sequential
//! minimal optimization with maximal-violating-pair working set selection.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SvrKernel {
    /// `exp(-gamma |u - v|^2)`
    Rbf,
    /// `tanh(gamma u.v)`
    Sigmoid,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvrParams {
    pub kernel: SvrKernel,
    pub c: f64,
    pub epsilon: f64,
    /// `None` means `1 / input dimension`.
    pub gamma: Option<f64>,
    /// Stop once the maximal KKT violation drops below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl SvrParams {
    pub fn with_kernel(kernel: SvrKernel) -> Self {
        Self {
            kernel,
            ..Self::default()
        }
    }

    pub fn gamma_for(&self, dim: usize) -> f64 {
        self.gamma.unwrap_or(1.0 / dim.max(1) as f64)
    }
}

impl Default for SvrParams {
    fn default() -> Self {
        Self {
            kernel: SvrKernel::Rbf,
            c: 1.0,
            epsilon: 0.1,
            gamma: None,
            tolerance: 1e-3,
            max_iterations: 10_000_000,
        }
    }
}

/// Non-zero entries of a vector plus its squared norm. One-hot encodings
/// have exactly one non-zero per gene, so kernels cost O(genes) instead of
/// O(genes * alphabet).
#[derive(Clone, Debug, PartialEq)]
pub struct SparseVector<F> {
    idx: Vec<u32>,
    val: Vec<F>,
    norm2: F,
}

impl<F: Scalar> SparseVector<F> {
    pub fn from_dense(x: &[F]) -> Self {
        let mut idx = Vec::new();
        let mut val = Vec::new();
        for (i, &v) in x.iter().enumerate() {
            if v != F::zero() {
                idx.push(i as u32);
                val.push(v);
            }
        }
        let norm2 = val.iter().map(|&v| v * v).sum();
        Self { idx, val, norm2 }
    }

    pub fn dot(&self, other: &Self) -> F {
        let (mut a, mut b) = (0, 0);
        let mut sum = F::zero();
        while a < self.idx.len() && b < other.idx.len() {
            match self.idx[a].cmp(&other.idx[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    sum = sum + self.val[a] * other.val[b];
                    a += 1;
                    b += 1;
                }
            }
        }
        sum
    }

    pub fn dot_dense(&self, x: &[F]) -> F {
        self.idx
            .iter()
            .zip(&self.val)
            .map(|(&i, &v)| v * x[i as usize])
            .sum()
    }
}

fn kernel_value<F: Scalar>(kernel: SvrKernel, gamma: F, dot: F, norm_a: F, norm_b: F) -> F {
    match kernel {
        SvrKernel::Rbf => {
            let d2 = (norm_a + norm_b - (dot + dot)).max(F::zero());
            (-gamma * d2).exp()
        }
        SvrKernel::Sigmoid => (gamma * dot).tanh(),
    }
}

/// Growing Gram matrix over a sequence of training points. Lets a caller that
/// only ever appends samples retrain without recomputing old kernel values.
#[derive(Clone, Debug)]
pub struct KernelCache<F> {
    kernel: SvrKernel,
    gamma: F,
    dim: usize,
    points: Vec<SparseVector<F>>,
    rows: Vec<Vec<F>>,
}

impl<F: Scalar> KernelCache<F> {
    pub fn new(kernel: SvrKernel, gamma: F, dim: usize) -> Self {
        Self {
            kernel,
            gamma,
            dim,
            points: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn for_params(params: &SvrParams, dim: usize) -> Self {
        Self::new(params.kernel, F::of(params.gamma_for(dim)), dim)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> F {
        self.rows[i][j]
    }

    pub fn push(&mut self, x: &[F]) {
        assert_eq!(x.len(), self.dim, "dimension of cached points");
        let p = SparseVector::from_dense(x);
        let mut row: Vec<F> = self
            .points
            .iter()
            .map(|q| kernel_value(self.kernel, self.gamma, p.dot(q), p.norm2, q.norm2))
            .collect();
        row.push(kernel_value(self.kernel, self.gamma, p.norm2, p.norm2, p.norm2));
        for (r, &k) in self.rows.iter_mut().zip(&row) {
            r.push(k);
        }
        self.rows.push(row);
        self.points.push(p);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvrModel<F> {
    kernel: SvrKernel,
    gamma: F,
    dim: usize,
    support: Vec<SparseVector<F>>,
    coef: Vec<F>,
    rho: F,
}

impl<F: Scalar> SvrModel<F> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_support_vectors(&self) -> usize {
        self.support.len()
    }

    pub fn predict(&self, x: &[F]) -> F {
        let norm_x: F = x.iter().map(|&v| v * v).sum();
        let sum: F = self
            .support
            .iter()
            .zip(&self.coef)
            .map(|(sv, &c)| c * kernel_value(self.kernel, self.gamma, sv.dot_dense(x), sv.norm2, norm_x))
            .sum();
        sum - self.rho
    }
}

#[derive(Clone, Debug)]
pub struct SvrFit<F> {
    pub model: SvrModel<F>,
    /// Model output on every training point, in training order.
    pub train_predictions: Vec<F>,
    pub iterations: usize,
}

pub fn fit_svr<F: Scalar>(params: &SvrParams, xs: &[Vec<F>], ys: &[F]) -> SvrFit<F> {
    let dim = xs.first().map_or(0, Vec::len);
    let mut cache = KernelCache::for_params(params, dim);
    for x in xs {
        cache.push(x);
    }
    fit_svr_cached(params, &cache, ys)
}

/// Trains on the points held by `cache` with targets `ys`.
///
/// The dual has `2n` variables: `a_t` for `t < n` (sign +1) and `a*_t` for
/// `t >= n` (sign -1), each boxed in `[0, C]`, with `sum sign_t a_t = 0`.
pub fn fit_svr_cached<F: Scalar>(params: &SvrParams, cache: &KernelCache<F>, ys: &[F]) -> SvrFit<F> {
    let n = ys.len();
    assert_eq!(cache.len(), n, "one target per cached point");
    let c = F::of(params.c);
    let eps = F::of(params.epsilon);
    let tol = F::of(params.tolerance);
    let tau = F::of(1e-12);
    let l2 = 2 * n;
    let sign = |t: usize| if t < n { F::one() } else { -F::one() };

    let mut alpha = vec![F::zero(); l2];
    let mut grad: Vec<F> = (0..l2)
        .map(|t| if t < n { eps - ys[t] } else { eps + ys[t - n] })
        .collect();
    let at_upper = |a: F| a >= c;
    let at_lower = |a: F| a <= F::zero();

    let mut iterations = 0;
    while iterations < params.max_iterations {
        // Maximal violating pair; the lowest index wins ties.
        let mut gmax = F::neg_infinity();
        let mut gmin = F::infinity();
        let (mut i, mut j) = (usize::MAX, usize::MAX);
        for t in 0..l2 {
            let yg = -sign(t) * grad[t];
            let up = if t < n {
                !at_upper(alpha[t])
            } else {
                !at_lower(alpha[t])
            };
            let low = if t < n {
                !at_lower(alpha[t])
            } else {
                !at_upper(alpha[t])
            };
            if up && yg > gmax {
                gmax = yg;
                i = t;
            }
            if low && yg < gmin {
                gmin = yg;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < tol {
            break;
        }
        iterations += 1;

        let (si, sj) = (sign(i), sign(j));
        let (ri, rj) = (&cache.rows[i % n], &cache.rows[j % n]);
        let q_ii = ri[i % n];
        let q_jj = rj[j % n];
        let q_ij = si * sj * ri[j % n];
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);
        if si != sj {
            let quad = (q_ii + q_jj + q_ij + q_ij).max(tau);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai = ai + delta;
            aj = aj + delta;
            if diff > F::zero() {
                if aj < F::zero() {
                    aj = F::zero();
                    ai = diff;
                }
            } else if ai < F::zero() {
                ai = F::zero();
                aj = -diff;
            }
            if diff > F::zero() {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let quad = (q_ii + q_jj - q_ij - q_ij).max(tau);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai = ai - delta;
            aj = aj + delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < F::zero() {
                aj = F::zero();
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < F::zero() {
                ai = F::zero();
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        for (t, g) in grad.iter_mut().enumerate() {
            let k = t % n;
            *g = *g + sign(t) * (si * ri[k] * di + sj * rj[k] * dj);
        }
    }

    // Offset: average over free variables, else the middle of the feasible interval.
    let (mut ub, mut lb) = (F::infinity(), F::neg_infinity());
    let (mut free, mut free_sum) = (0usize, F::zero());
    for t in 0..l2 {
        let yg = sign(t) * grad[t];
        let positive = t < n;
        if at_upper(alpha[t]) {
            if positive {
                lb = lb.max(yg);
            } else {
                ub = ub.min(yg);
            }
        } else if at_lower(alpha[t]) {
            if positive {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum = free_sum + yg;
        }
    }
    let rho = if free > 0 {
        free_sum / F::of_usize(free)
    } else {
        (ub + lb) / F::of(2.0)
    };

    let coef_all: Vec<F> = (0..n).map(|t| alpha[t] - alpha[t + n]).collect();
    let support_idx: Vec<usize> = (0..n).filter(|&t| coef_all[t] != F::zero()).collect();
    let train_predictions = (0..n)
        .map(|r| {
            let row = &cache.rows[r];
            support_idx.iter().map(|&s| coef_all[s] * row[s]).sum::<F>() - rho
        })
        .collect();
    let model = SvrModel {
        kernel: cache.kernel,
        gamma: cache.gamma,
        dim: cache.dim,
        support: support_idx.iter().map(|&s| cache.points[s].clone()).collect(),
        coef: support_idx.iter().map(|&s| coef_all[s]).collect(),
        rho,
    };
    SvrFit {
        model,
        train_predictions,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genotype::{Genotype, ProblemSpec};
    use crate::surrogate::one_hot_encode;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sparse_products() {
        let a = SparseVector::from_dense(&[0.0, 2.0, 0.0, 1.0]);
        let b = SparseVector::from_dense(&[1.0, 3.0, 0.0, 0.0]);
        assert_eq!(a.dot(&b), 6.0);
        assert_eq!(a.dot_dense(&[1.0, 3.0, 5.0, 7.0]), 13.0);
        assert_eq!(a.norm2, 5.0);
    }

    #[test]
    fn kernels() {
        let params = SvrParams {
            gamma: Some(0.5),
            ..SvrParams::default()
        };
        let mut cache = KernelCache::<f64>::for_params(&params, 2);
        cache.push(&[1.0, 0.0]);
        cache.push(&[0.0, 1.0]);
        assert_eq!(cache.get(0, 0), 1.0);
        assert!((cache.get(0, 1) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(cache.get(1, 0), cache.get(0, 1));
        let mut sig = KernelCache::<f64>::new(SvrKernel::Sigmoid, 0.5, 2);
        sig.push(&[1.0, 1.0]);
        assert!((sig.get(0, 0) - 1f64.tanh()).abs() < 1e-15);
    }

    fn prediction_gap(xs: &[Vec<f64>], fit: &SvrFit<f64>) -> f64 {
        xs.iter()
            .zip(&fit.train_predictions)
            .map(|(x, p)| (fit.model.predict(x) - p).abs())
            .fold(0.0, f64::max)
    }

    fn onehot_dataset(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = ProblemSpec::onemax(8, 3).unwrap();
        let gs: Vec<Genotype> = (0..n).map(|_| Genotype::random(&spec, &mut rng)).collect();
        let xs: Vec<Vec<f64>> = gs.iter().map(|g| one_hot_encode(g, 3)).collect();
        let ys = gs
            .iter()
            .map(|g| g.genes().iter().filter(|&&v| v == 0).count() as f64 / 8.0)
            .collect();
        (xs, ys)
    }

    #[test]
    fn training_predictions_match_direct_prediction() {
        let (xs, ys) = onehot_dataset(60, 2);
        let fit = fit_svr(&SvrParams::default(), &xs, &ys);
        assert!(prediction_gap(&xs, &fit) < 1e-12);
        assert!(fit.model.num_support_vectors() > 0);
    }

    #[test]
    fn fits_within_the_tube_mostly() {
        let (xs, ys) = onehot_dataset(120, 3);
        let params = SvrParams {
            c: 10.0,
            epsilon: 0.01,
            ..SvrParams::default()
        };
        let fit = fit_svr(&params, &xs, &ys);
        let mse: f64 = fit
            .train_predictions
            .iter()
            .zip(&ys)
            .map(|(p, y)| (p - y).powi(2))
            .sum::<f64>()
            / ys.len() as f64;
        let var: f64 = {
            let m = ys.iter().sum::<f64>() / ys.len() as f64;
            ys.iter().map(|y| (y - m).powi(2)).sum::<f64>() / ys.len() as f64
        };
        assert!(mse < 0.2 * var, "mse {mse} var {var}");
    }

    #[test]
    fn incremental_cache_equals_batch() {
        let (xs, ys) = onehot_dataset(40, 4);
        let params = SvrParams::with_kernel(SvrKernel::Sigmoid);
        let batch = fit_svr(&params, &xs, &ys);
        let mut cache = KernelCache::for_params(&params, xs[0].len());
        for x in &xs[..20] {
            cache.push(x);
        }
        let _ = fit_svr_cached(&params, &cache, &ys[..20]);
        for x in &xs[20..] {
            cache.push(x);
        }
        let incremental = fit_svr_cached(&params, &cache, &ys);
        assert_eq!(incremental.model, batch.model);
    }

    #[test]
    fn order_invariant_at_tight_tolerance() {
        let (xs, ys) = onehot_dataset(50, 5);
        let params = SvrParams {
            tolerance: 1e-10,
            ..SvrParams::default()
        };
        let fit = fit_svr(&params, &xs, &ys);
        let mut order: Vec<usize> = (0..xs.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(9));
        let xs2: Vec<Vec<f64>> = order.iter().map(|&i| xs[i].clone()).collect();
        let ys2: Vec<f64> = order.iter().map(|&i| ys[i]).collect();
        let fit2 = fit_svr(&params, &xs2, &ys2);
        for x in &xs {
            assert!((fit.model.predict(x) - fit2.model.predict(x)).abs() < 1e-6);
        }
    }
}
