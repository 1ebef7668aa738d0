use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

use super::ProblemError;

/// Dense classification data: `len()` rows of `num_features` features and a
/// label in `0..num_classes`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<F> {
    pub name: String,
    features: Vec<F>,
    num_features: usize,
    labels: Vec<usize>,
    num_classes: usize,
}

impl<F: Scalar> Dataset<F> {
    /// Panics if the shapes disagree or a label is out of range.
    pub fn new(name: impl Into<String>, rows: Vec<Vec<F>>, labels: Vec<usize>, num_classes: usize) -> Self {
        assert_eq!(rows.len(), labels.len(), "one label per row");
        assert!(labels.iter().all(|&y| y < num_classes), "label out of range");
        let num_features = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == num_features), "ragged rows");
        Self {
            name: name.into(),
            features: rows.into_iter().flatten().collect(),
            num_features,
            labels,
            num_classes,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.features[i * self.num_features..(i + 1) * self.num_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[F]> + '_ {
        (0..self.len()).map(move |i| self.row(i))
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Rows at `indices`, in that order, keeping the global class count.
    pub fn subset(&self, indices: &[usize], name: impl Into<String>) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.num_features);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Self {
            name: name.into(),
            features,
            num_features: self.num_features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }

    /// Min-max scales every feature column to [0, 1]; constant columns become 0.
    pub fn scale_to_unit(&mut self) {
        let d = self.num_features;
        for j in 0..d {
            let (lo, hi) = (0..self.len()).fold((F::infinity(), F::neg_infinity()), |(lo, hi), i| {
                let v = self.features[i * d + j];
                (lo.min(v), hi.max(v))
            });
            let range = hi - lo;
            for i in 0..self.len() {
                let v = &mut self.features[i * d + j];
                *v = if range > F::zero() {
                    (*v - lo) / range
                } else {
                    F::zero()
                };
            }
        }
    }
}

/// Training, validation and test parts, in that order.
pub type Splits<T> = (T, T, T);

/// How a dataset is carved into validation, test and training samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub validation_size: usize,
    pub test_size: usize,
    pub train_size: usize,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_size: usize, seed: u64) -> Self {
        Self {
            validation_size: 500,
            test_size: 500,
            train_size,
            seed,
        }
    }

    pub fn required(&self) -> usize {
        self.validation_size + self.test_size + self.train_size
    }

    /// Shuffles `0..n` with the split seed and returns (train, validation, test) indices.
    pub fn indices(&self, n: usize) -> Result<Splits<Vec<usize>>, ProblemError> {
        if n < self.required() {
            return Err(ProblemError::TooFewSamples {
                needed: self.required(),
                available: n,
            });
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(self.seed));
        let (validation, rest) = order.split_at(self.validation_size);
        let (test, rest) = rest.split_at(self.test_size);
        let train = &rest[..self.train_size];
        Ok((train.to_vec(), validation.to_vec(), test.to_vec()))
    }

    pub fn apply<F: Scalar>(&self, data: &Dataset<F>) -> Result<Splits<Dataset<F>>, ProblemError> {
        let (train, validation, test) = self.indices(data.len())?;
        Ok((
            data.subset(&train, format!("{}/train", data.name)),
            data.subset(&validation, format!("{}/validation", data.name)),
            data.subset(&test, format!("{}/test", data.name)),
        ))
    }
}

/// Parses a comma-separated table with one header row, numeric feature
/// columns and an integer label in the last column. Labels are re-indexed
/// densely in ascending order of their original value.
pub fn read_dataset<F: Scalar, R: Read>(reader: R, name: &str) -> Result<Dataset<F>, ProblemError> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    let mut raw_labels = Vec::new();
    let mut width = None;
    for (i, record) in csv.records().enumerate() {
        let record = record.map_err(|e| ProblemError::Parse {
            record: i + 1,
            message: e.to_string(),
        })?;
        let parse_err = |message: String| ProblemError::Parse {
            record: i + 1,
            message,
        };
        if record.len() < 2 {
            return Err(parse_err("need at least one feature and a label".into()));
        }
        if *width.get_or_insert(record.len()) != record.len() {
            return Err(parse_err("inconsistent column count".into()));
        }
        let fields: Vec<&str> = record.iter().collect();
        let (label, features) = fields.split_last().expect("at least two columns");
        let row = features
            .iter()
            .map(|v| {
                let x: f64 = v.parse().map_err(|_| parse_err(format!("bad feature {v:?}")))?;
                if x.is_finite() {
                    Ok(F::of(x))
                } else {
                    Err(parse_err(format!("non-finite feature {v:?}")))
                }
            })
            .collect::<Result<Vec<F>, _>>()?;
        let label: i64 = label
            .parse()
            .map_err(|_| parse_err(format!("bad label {label:?}")))?;
        rows.push(row);
        raw_labels.push(label);
    }
    let classes: BTreeMap<i64, usize> = raw_labels
        .iter()
        .copied()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, l)| (l, i))
        .collect();
    if classes.len() < 2 {
        return Err(ProblemError::Parse {
            record: rows.len(),
            message: "dataset needs at least two classes".into(),
        });
    }
    let labels = raw_labels.iter().map(|l| classes[l]).collect();
    Ok(Dataset::new(name, rows, labels, classes.len()))
}

pub fn load_dataset<F: Scalar>(path: &Path) -> Result<Dataset<F>, ProblemError> {
    let file = std::fs::File::open(path).map_err(|source| ProblemError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let name = path
        .file_stem()
        .map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned());
    read_dataset(std::io::BufReader::new(file), &name)
}

/// Loads `path`, scales features over the whole dataset and splits it.
pub fn load_and_split<F: Scalar>(path: &Path, spec: &SplitSpec) -> Result<Splits<Dataset<F>>, ProblemError> {
    let mut data = load_dataset(path)?;
    data.scale_to_unit();
    spec.apply(&data)
}

pub fn write_dataset_csv<F: Scalar, W: Write>(data: &Dataset<F>, out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..data.num_features()).map(|j| format!("x{j}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for i in 0..data.len() {
        let mut rec: Vec<String> = data.row(i).iter().map(|v| format!("{v}")).collect();
        rec.push(data.label(i).to_string());
        w.write_record(&rec)?;
    }
    w.flush()
}

/// Seeded multi-modal classification data: every class is a mixture of
/// `clusters_per_class` Gaussian blobs with random centres in the unit cube.
pub fn synthetic_classification(
    samples: usize,
    features: usize,
    classes: usize,
    clusters_per_class: usize,
    spread: f64,
    seed: u64,
) -> Dataset<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres: Vec<Vec<f64>> = (0..classes * clusters_per_class)
        .map(|_| (0..features).map(|_| rng.random::<f64>()).collect())
        .collect();
    let mut rows = Vec::with_capacity(samples);
    let mut labels = Vec::with_capacity(samples);
    for i in 0..samples {
        let class = i % classes;
        let cluster = class * clusters_per_class + rng.random_range(0..clusters_per_class);
        rows.push(
            centres[cluster]
                .iter()
                .map(|&c| c + spread * standard_normal(&mut rng))
                .collect(),
        );
        labels.push(class);
    }
    Dataset::new("synthetic", rows, labels, classes)
}

fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Box-Muller
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
