use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub num_trees: usize,
    /// A node with fewer samples becomes a leaf. Values below 2 impose no limit.
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Fraction of features considered at every split, rounded up.
    pub ratio_features: f64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            num_trees: 10,
            min_samples_split: 1,
            min_samples_leaf: 1,
            ratio_features: 1.0,
        }
    }
}

impl ForestParams {
    pub fn features_per_split(&self, dim: usize) -> usize {
        ((self.ratio_features * dim as f64).ceil() as usize).clamp(1, dim.max(1))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TreeNode<F> {
    Leaf {
        value: F,
    },
    /// Samples with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: F,
        left: usize,
        right: usize,
    },
}

/// Nodes stored flat with the root at index 0.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionTree<F> {
    nodes: Vec<TreeNode<F>>,
}

impl<F: Scalar> RegressionTree<F> {
    pub fn leaf(value: F) -> Self {
        Self {
            nodes: vec![TreeNode::Leaf { value }],
        }
    }

    pub fn split(feature: usize, threshold: F, left: Self, right: Self) -> Self {
        let offset_left = 1;
        let offset_right = 1 + left.nodes.len();
        let mut nodes = vec![TreeNode::Split {
            feature,
            threshold,
            left: offset_left,
            right: offset_right,
        }];
        for (sub, offset) in [(left, offset_left), (right, offset_right)] {
            nodes.extend(sub.nodes.into_iter().map(|n| match n {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => TreeNode::Split {
                    feature,
                    threshold,
                    left: left + offset,
                    right: right + offset,
                },
                leaf => leaf,
            }));
        }
        Self { nodes }
    }

    pub fn nodes(&self) -> &[TreeNode<F>] {
        &self.nodes
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    pub fn predict(&self, x: &[F]) -> F {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }
}

struct Builder<'a, F> {
    xs: &'a [Vec<F>],
    ys: &'a [F],
    params: &'a ForestParams,
    mtry: usize,
    nodes: Vec<TreeNode<F>>,
    order: Vec<usize>,
}

struct BestSplit<F> {
    feature: usize,
    threshold: F,
    score: F,
}

impl<F: Scalar> Builder<'_, F> {
    fn mean(&self, idx: &[usize]) -> F {
        idx.iter().map(|&i| self.ys[i]).sum::<F>() / F::of_usize(idx.len())
    }

    fn grow(&mut self, idx: &mut [usize], rng: &mut ChaCha8Rng) -> usize {
        let at = self.nodes.len();
        let value = self.mean(idx);
        self.nodes.push(TreeNode::Leaf { value });
        let n = idx.len();
        let leaf = self.params.min_samples_leaf.max(1);
        if n < self.params.min_samples_split.max(2) || n < 2 * leaf {
            return at;
        }
        if idx.iter().all(|&i| self.ys[i] == self.ys[idx[0]]) {
            return at;
        }
        let Some(best) = self.best_split(idx, leaf, rng) else {
            return at;
        };
        let mut cut = 0;
        for k in 0..n {
            if self.xs[idx[k]][best.feature] <= best.threshold {
                idx.swap(k, cut);
                cut += 1;
            }
        }
        let (l, r) = idx.split_at_mut(cut);
        let left = self.grow(l, rng);
        let right = self.grow(r, rng);
        self.nodes[at] = TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        at
    }

    /// Maximizes `S_l^2 / n_l + S_r^2 / n_r`, which is equivalent to maximal
    /// reduction of the summed squared error.
    fn best_split(&mut self, idx: &[usize], leaf: usize, rng: &mut ChaCha8Rng) -> Option<BestSplit<F>> {
        let dim = self.xs[0].len();
        let n = idx.len();
        let total: F = idx.iter().map(|&i| self.ys[i]).sum();
        let mut best: Option<BestSplit<F>> = None;
        for feature in sample(rng, dim, self.mtry) {
            self.order.clear();
            self.order.extend_from_slice(idx);
            let xs = self.xs;
            self.order.sort_by(|&a, &b| {
                xs[a][feature]
                    .partial_cmp(&xs[b][feature])
                    .expect("finite features")
            });
            let mut left_sum = F::zero();
            for k in 0..n - 1 {
                let i = self.order[k];
                left_sum = left_sum + self.ys[i];
                let nl = k + 1;
                if nl < leaf || n - nl < leaf {
                    continue;
                }
                let (v, next) = (xs[i][feature], xs[self.order[k + 1]][feature]);
                if v == next {
                    continue;
                }
                let right_sum = total - left_sum;
                let score =
                    left_sum * left_sum / F::of_usize(nl) + right_sum * right_sum / F::of_usize(n - nl);
                if best.as_ref().is_none_or(|b| score > b.score) {
                    best = Some(BestSplit {
                        feature,
                        threshold: (v + next) / F::of(2.0),
                        score,
                    });
                }
            }
        }
        best
    }
}

/// Bagged variance-reduction regression trees averaged at prediction time.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomForest<F> {
    trees: Vec<RegressionTree<F>>,
    dim: usize,
}

impl<F: Scalar> RandomForest<F> {
    pub fn fit(params: &ForestParams, xs: &[Vec<F>], ys: &[F], seed: u64) -> Self {
        assert!(!xs.is_empty(), "cannot fit on zero samples");
        assert_eq!(xs.len(), ys.len());
        let dim = xs[0].len();
        let n = xs.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut builder = Builder {
            xs,
            ys,
            params,
            mtry: params.features_per_split(dim).min(dim),
            nodes: Vec::new(),
            order: Vec::with_capacity(n),
        };
        let trees = (0..params.num_trees)
            .map(|_| {
                let mut idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                builder.nodes.clear();
                if dim == 0 {
                    let value = builder.mean(&idx);
                    return RegressionTree::leaf(value);
                }
                builder.grow(&mut idx, &mut rng);
                RegressionTree {
                    nodes: std::mem::take(&mut builder.nodes),
                }
            })
            .collect();
        Self { trees, dim }
    }

    pub fn from_trees(trees: Vec<RegressionTree<F>>, dim: usize) -> Self {
        assert!(!trees.is_empty(), "a forest needs at least one tree");
        Self { trees, dim }
    }

    pub fn trees(&self) -> &[RegressionTree<F>] {
        &self.trees
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn predict(&self, x: &[F]) -> F {
        self.trees.iter().map(|t| t.predict(x)).sum::<F>() / F::of_usize(self.trees.len())
    }
}
