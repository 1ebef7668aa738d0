use crate::error::{Error, Result};
use crate::genotype::{FitnessFunction, Gene, Genotype, ProblemSpec};
use crate::scalar::Scalar;

use super::dataset::Dataset;
use super::learner::{Learner, LogisticRegression};
use super::ProblemError;

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax_lowest<F: Scalar>(row: &[F]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = k;
        }
    }
    best
}

fn accuracy<F: Scalar>(proba: &[F], data: &Dataset<F>) -> F {
    let c = data.num_classes();
    let correct = proba
        .chunks(c)
        .zip(data.labels())
        .filter(|(row, &y)| argmax_lowest(row) == y)
        .count();
    F::of_usize(correct) / F::of_usize(data.len())
}

/// Validation accuracy of one learner fitted on the whole training set.
pub fn single_learner_accuracy<F: Scalar, L: Learner<F>>(
    train: &Dataset<F>,
    validation: &Dataset<F>,
    learner: &L,
) -> F {
    let rows: Vec<&[F]> = train.rows().collect();
    let model = learner.fit(&rows, train.labels(), train.num_classes());
    let eval_rows: Vec<&[F]> = validation.rows().collect();
    let mut proba = Vec::with_capacity(validation.len() * validation.num_classes());
    learner.predict_proba(&model, &eval_rows, &mut proba);
    accuracy(&proba, validation)
}

/// Accuracy on `validation` of the ensemble whose members are trained on the
/// subsets of `train` selected by equal gene values.
///
/// Member probabilities are averaged and the most probable class predicted.
/// Empty subsets contribute no member. Members are combined in order of the
/// smallest sample index they contain, so relabeled genotypes score identically.
pub fn partition_fitness<F: Scalar, L: Learner<F>>(
    genotype: &Genotype,
    train: &Dataset<F>,
    validation: &Dataset<F>,
    learner: &L,
) -> Result<F, ProblemError> {
    assert_eq!(genotype.len(), train.len(), "one gene per training sample");
    let mut groups: Vec<(Gene, Vec<usize>)> = Vec::new();
    for (i, &g) in genotype.genes().iter().enumerate() {
        match groups.iter_mut().find(|(label, _)| *label == g) {
            Some((_, members)) => members.push(i),
            None => groups.push((g, vec![i])),
        }
    }
    if groups.is_empty() {
        return Err(ProblemError::NoTrainingData);
    }
    let c = validation.num_classes();
    let eval_rows: Vec<&[F]> = validation.rows().collect();
    let mut total = vec![F::zero(); validation.len() * c];
    let mut proba = Vec::with_capacity(total.len());
    for (_, members) in &groups {
        let rows: Vec<&[F]> = members.iter().map(|&i| train.row(i)).collect();
        let labels: Vec<usize> = members.iter().map(|&i| train.label(i)).collect();
        let model = learner.fit(&rows, &labels, train.num_classes());
        proba.clear();
        learner.predict_proba(&model, &eval_rows, &mut proba);
        for (t, &p) in total.iter_mut().zip(&proba) {
            *t = *t + p;
        }
    }
    let count = F::of_usize(groups.len());
    for t in &mut total {
        *t = *t / count;
    }
    Ok(accuracy(&total, validation))
}

/// The partition-based ensemble learning objective.
pub struct PartitionProblem<F: Scalar, L = LogisticRegression> {
    spec: ProblemSpec,
    train: Dataset<F>,
    validation: Dataset<F>,
    learner: L,
}

impl<F: Scalar, L: Learner<F>> PartitionProblem<F, L> {
    pub fn new(train: Dataset<F>, validation: Dataset<F>, alphabet_size: usize, learner: L) -> Result<Self> {
        if train.is_empty() {
            return Err(ProblemError::NoTrainingData.into());
        }
        if validation.is_empty() {
            return Err(Error::InvalidSpec("validation set is empty".into()));
        }
        let spec = ProblemSpec::partition(train.len(), alphabet_size)?;
        Ok(Self {
            spec,
            train,
            validation,
            learner,
        })
    }

    pub fn train(&self) -> &Dataset<F> {
        &self.train
    }

    pub fn validation(&self) -> &Dataset<F> {
        &self.validation
    }

    pub fn learner(&self) -> &L {
        &self.learner
    }

    /// Accuracy of a single learner on all training samples.
    pub fn baseline(&self) -> F {
        single_learner_accuracy(&self.train, &self.validation, &self.learner)
    }
}

impl<F: Scalar, L: Learner<F>> FitnessFunction<F> for PartitionProblem<F, L> {
    fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    fn fitness(&self, genotype: &Genotype) -> F {
        partition_fitness(genotype, &self.train, &self.validation, &self.learner)
            .expect("a non-empty genotype always has a training subset")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::dataset::synthetic_classification;
    use crate::problems::SplitSpec;

    /// Nearest-centroid-style learner on feature 0: every class seen in
    /// training gets weight exp(-|x - centroid|); unseen classes share the
    /// remainder 1 - max(seen weight). Weights are normalized.
    struct NearestCentroid;

    impl Learner<f64> for NearestCentroid {
        type Model = Vec<Option<f64>>;

        fn fit(&self, rows: &[&[f64]], labels: &[usize], num_classes: usize) -> Self::Model {
            (0..num_classes)
                .map(|k| {
                    let xs: Vec<f64> = rows
                        .iter()
                        .zip(labels)
                        .filter(|(_, &y)| y == k)
                        .map(|(r, _)| r[0])
                        .collect();
                    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
                })
                .collect()
        }

        fn predict_proba(&self, model: &Self::Model, rows: &[&[f64]], out: &mut Vec<f64>) {
            for x in rows {
                let seen: Vec<Option<f64>> = model
                    .iter()
                    .map(|m| m.map(|c| (-(x[0] - c).abs()).exp()))
                    .collect();
                let top = seen.iter().flatten().copied().fold(0.0, f64::max);
                let unseen = seen.iter().filter(|w| w.is_none()).count();
                let w: Vec<f64> = seen
                    .iter()
                    .map(|s| s.unwrap_or((1.0 - top) / unseen.max(1) as f64))
                    .collect();
                let total: f64 = w.iter().sum();
                out.extend(w.iter().map(|v| v / total));
            }
        }
    }

    fn toy() -> (Dataset<f64>, Dataset<f64>) {
        let train = Dataset::new(
            "train",
            vec![vec![0.0], vec![0.0], vec![1.0], vec![1.0]],
            vec![0, 0, 1, 1],
            2,
        );
        let validation = Dataset::new("val", vec![vec![0.0], vec![1.0]], vec![0, 1], 2);
        (train, validation)
    }

    #[test]
    fn toy_partition_is_perfect() {
        let (train, validation) = toy();
        // At x = 0 the class-0 member gives (1, 0) and the class-1 member
        // gives (1 - e^-1, e^-1); the average favours class 0. Symmetric at x = 1.
        let p0 = 0.5 * (1.0 + (1.0 - (-1f64).exp()));
        assert!(p0 > 0.5);
        let g = Genotype::new(vec![0, 0, 1, 1]);
        assert_eq!(
            partition_fitness(&g, &train, &validation, &NearestCentroid).unwrap(),
            1.0
        );
    }

    #[test]
    fn ties_go_to_lowest_class() {
        assert_eq!(argmax_lowest(&[0.5, 0.5]), 0);
        assert_eq!(argmax_lowest(&[0.2, 0.4, 0.4]), 1);
    }

    #[test]
    fn one_subset_equals_single_learner() {
        let data = synthetic_classification(1100, 4, 3, 2, 0.15, 1);
        let (train, val, _) = SplitSpec::new(60, 2).apply(&data).unwrap();
        let lr = LogisticRegression::default();
        let ensemble = partition_fitness(&Genotype::zeros(60), &train, &val, &lr).unwrap();
        assert_eq!(ensemble, single_learner_accuracy(&train, &val, &lr));
    }

    #[test]
    fn label_permutation_gives_identical_fitness() {
        let data = synthetic_classification(1040, 3, 2, 2, 0.2, 3);
        let (train, val, _) = SplitSpec::new(40, 4).apply(&data).unwrap();
        let lr = LogisticRegression::default();
        let genes: Vec<Gene> = (0..40).map(|i| ((i * 7 + i / 3) % 3) as Gene).collect();
        let g = Genotype::new(genes.clone());
        let swapped = Genotype::new(genes.iter().map(|&x| [2, 0, 1][x as usize]).collect());
        let a = partition_fitness(&g, &train, &val, &lr).unwrap();
        let b = partition_fitness(&swapped, &train, &val, &lr).unwrap();
        assert_eq!(a, b);
        assert!((0.0..=1.0).contains(&a));
    }
}
