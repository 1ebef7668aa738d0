use crate::scalar::Scalar;

/// A classifier producing class-probability rows over all `num_classes`
/// global classes. `fit` must be deterministic.
pub trait Learner<F: Scalar> {
    type Model;

    fn fit(&self, rows: &[&[F]], labels: &[usize], num_classes: usize) -> Self::Model;

    /// Appends one probability row of length `num_classes` per input row to `out`.
    fn predict_proba(&self, model: &Self::Model, rows: &[&[F]], out: &mut Vec<F>);
}

/// Multinomial logistic regression trained by full-batch gradient descent
/// from zero weights for a fixed number of iterations.
///
/// Minimizes `mean cross-entropy + |W|^2 / (2 C n)`, i.e. the usual
/// `|W|^2 / 2 + C * sum cross-entropy` objective scaled by `1 / (C n)`.
/// Intercepts are not penalized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogisticRegression {
    pub c: f64,
    pub step: f64,
    pub iterations: usize,
}

impl Default for LogisticRegression {
    fn default() -> Self {
        Self {
            c: 1.0,
            step: 0.5,
            iterations: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LogisticModel<F> {
    /// The training data held a single class.
    Constant { class: usize, num_classes: usize },
    Linear {
        /// `num_classes x num_features`, row-major.
        weights: Vec<F>,
        bias: Vec<F>,
        num_features: usize,
    },
}

impl<F: Scalar> LogisticModel<F> {
    pub fn num_classes(&self) -> usize {
        match self {
            LogisticModel::Constant { num_classes, .. } => *num_classes,
            LogisticModel::Linear { bias, .. } => bias.len(),
        }
    }
}

fn softmax_into<F: Scalar>(weights: &[F], bias: &[F], d: usize, x: &[F], out: &mut [F]) {
    for (k, o) in out.iter_mut().enumerate() {
        let w = &weights[k * d..(k + 1) * d];
        *o = bias[k] + w.iter().zip(x).map(|(&a, &b)| a * b).sum::<F>();
    }
    let max = out.iter().copied().fold(F::neg_infinity(), F::max);
    let mut total = F::zero();
    for o in out.iter_mut() {
        *o = (*o - max).exp();
        total = total + *o;
    }
    for o in out.iter_mut() {
        *o = *o / total;
    }
}

impl<F: Scalar> Learner<F> for LogisticRegression {
    type Model = LogisticModel<F>;

    fn fit(&self, rows: &[&[F]], labels: &[usize], num_classes: usize) -> LogisticModel<F> {
        assert!(!rows.is_empty(), "cannot fit on zero samples");
        if labels.iter().all(|&y| y == labels[0]) {
            return LogisticModel::Constant {
                class: labels[0],
                num_classes,
            };
        }
        let d = rows[0].len();
        let n = F::of_usize(rows.len());
        let step = F::of(self.step);
        let penalty = F::one() / (F::of(self.c) * n);
        let mut weights = vec![F::zero(); num_classes * d];
        let mut bias = vec![F::zero(); num_classes];
        let mut grad_w = vec![F::zero(); num_classes * d];
        let mut grad_b = vec![F::zero(); num_classes];
        let mut p = vec![F::zero(); num_classes];
        for _ in 0..self.iterations {
            grad_w.iter_mut().for_each(|g| *g = F::zero());
            grad_b.iter_mut().for_each(|g| *g = F::zero());
            for (x, &y) in rows.iter().zip(labels) {
                softmax_into(&weights, &bias, d, x, &mut p);
                p[y] = p[y] - F::one();
                for (k, &err) in p.iter().enumerate() {
                    grad_b[k] = grad_b[k] + err;
                    for (g, &xj) in grad_w[k * d..(k + 1) * d].iter_mut().zip(x.iter()) {
                        *g = *g + err * xj;
                    }
                }
            }
            for (w, g) in weights.iter_mut().zip(&grad_w) {
                *w = *w - step * (*g / n + penalty * *w);
            }
            for (b, g) in bias.iter_mut().zip(&grad_b) {
                *b = *b - step * (*g / n);
            }
        }
        LogisticModel::Linear {
            weights,
            bias,
            num_features: d,
        }
    }

    fn predict_proba(&self, model: &LogisticModel<F>, rows: &[&[F]], out: &mut Vec<F>) {
        match model {
            LogisticModel::Constant { class, num_classes } => {
                for _ in rows {
                    out.extend((0..*num_classes).map(|k| if k == *class { F::one() } else { F::zero() }));
                }
            }
            LogisticModel::Linear {
                weights,
                bias,
                num_features,
            } => {
                let c = bias.len();
                for x in rows {
                    let start = out.len();
                    out.resize(start + c, F::zero());
                    softmax_into(weights, bias, *num_features, x, &mut out[start..]);
                }
            }
        }
    }
}
