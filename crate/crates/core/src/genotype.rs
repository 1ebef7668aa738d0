//! Solution representation, partition normalization and the real-evaluation
//! ledger shared by every search algorithm.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub type Gene = u16;

/// Which objective a [`ProblemSpec`] describes, with its problem-specific parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitnessKind {
    /// Ensemble of learners trained on the subsets of a partition of the training data.
    PartitionEnsemble,
    /// Concatenated deceptive traps of `block_size` bits.
    Trap { block_size: usize },
    /// Number of genes equal to zero.
    CategoricalOnemax,
}

impl FitnessKind {
    /// Partition genotypes are invariant to relabeling of subsets; the synthetic
    /// landscapes are not.
    pub fn is_label_symmetric(&self) -> bool {
        matches!(self, FitnessKind::PartitionEnsemble)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub num_vars: usize,
    pub alphabet_size: usize,
    pub kind: FitnessKind,
}

impl ProblemSpec {
    pub fn new(num_vars: usize, alphabet_size: usize, kind: FitnessKind) -> Result<Self> {
        if num_vars == 0 {
            return Err(Error::InvalidSpec("num_vars must be at least 1".into()));
        }
        if alphabet_size < 2 {
            return Err(Error::InvalidSpec("alphabet_size must be at least 2".into()));
        }
        if alphabet_size > Gene::MAX as usize + 1 {
            return Err(Error::InvalidSpec(format!(
                "alphabet_size {alphabet_size} exceeds the gene range"
            )));
        }
        if let FitnessKind::Trap { block_size } = kind {
            if alphabet_size != 2 {
                return Err(Error::InvalidSpec("trap requires alphabet_size 2".into()));
            }
            if block_size == 0 || !num_vars.is_multiple_of(block_size) {
                return Err(Error::InvalidSpec(format!(
                    "trap block size {block_size} does not divide {num_vars}"
                )));
            }
        }
        Ok(Self {
            num_vars,
            alphabet_size,
            kind,
        })
    }

    pub fn trap(num_vars: usize, block_size: usize) -> Result<Self> {
        Self::new(num_vars, 2, FitnessKind::Trap { block_size })
    }

    pub fn onemax(num_vars: usize, alphabet_size: usize) -> Result<Self> {
        Self::new(num_vars, alphabet_size, FitnessKind::CategoricalOnemax)
    }

    pub fn partition(num_vars: usize, alphabet_size: usize) -> Result<Self> {
        Self::new(num_vars, alphabet_size, FitnessKind::PartitionEnsemble)
    }

    /// Size of a one-hot encoded genotype.
    pub fn encoded_len(&self) -> usize {
        self.num_vars * self.alphabet_size
    }
}

/// A fixed-length vector of categorical gene values.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Genotype(Vec<Gene>);

impl Genotype {
    pub fn new(genes: Vec<Gene>) -> Self {
        Self(genes)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0; len])
    }

    /// Uniformly random genotype for `spec`.
    pub fn random<R: Rng + ?Sized>(spec: &ProblemSpec, rng: &mut R) -> Self {
        let alphabet = spec.alphabet_size as Gene;
        Self(
            (0..spec.num_vars)
                .map(|_| rng.random_range(0..alphabet))
                .collect(),
        )
    }

    pub fn genes(&self) -> &[Gene] {
        &self.0
    }

    pub fn genes_mut(&mut self) -> &mut [Gene] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn validate(&self, spec: &ProblemSpec) -> Result<()> {
        if self.0.len() != spec.num_vars {
            return Err(Error::InvalidGenotype(format!(
                "length {} != {}",
                self.0.len(),
                spec.num_vars
            )));
        }
        if let Some(g) = self.0.iter().find(|&&g| g as usize >= spec.alphabet_size) {
            return Err(Error::InvalidGenotype(format!(
                "gene {g} outside alphabet of size {}",
                spec.alphabet_size
            )));
        }
        Ok(())
    }

    /// Canonical representative of the partition encoded by this genotype.
    pub fn normalized(&self) -> Genotype {
        normalize_partition(self)
    }

    /// Comma-separated decimal serialization, e.g. `0,1,12`.
    pub fn key(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Genotype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, g) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{g}")?;
        }
        Ok(())
    }
}

impl FromStr for Genotype {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Self(Vec::new()));
        }
        s.split(',')
            .map(|t| {
                t.trim()
                    .parse::<Gene>()
                    .map_err(|e| Error::InvalidGenotype(format!("{t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

impl From<Vec<Gene>> for Genotype {
    fn from(genes: Vec<Gene>) -> Self {
        Self(genes)
    }
}

/// Relabels subsets `0, 1, 2, ...` in order of the smallest variable index
/// they contain, i.e. first-occurrence relabeling.
pub fn normalize_partition(g: &Genotype) -> Genotype {
    let max = g.0.iter().copied().max().unwrap_or(0) as usize;
    let mut relabel: Vec<Option<Gene>> = vec![None; max + 1];
    let mut next: Gene = 0;
    let genes =
        g.0.iter()
            .map(|&v| {
                *relabel[v as usize].get_or_insert_with(|| {
                    let label = next;
                    next += 1;
                    label
                })
            })
            .collect();
    Genotype(genes)
}

/// A deterministic black-box objective over genotypes. Maximized.
pub trait FitnessFunction<F: Scalar> {
    fn spec(&self) -> &ProblemSpec;
    fn fitness(&self, genotype: &Genotype) -> F;
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution<F> {
    pub genotype: Genotype,
    pub fitness: Option<F>,
    pub surrogate_fitness: Option<F>,
}

impl<F: Scalar> Solution<F> {
    pub fn new(genotype: Genotype) -> Self {
        Self {
            genotype,
            fitness: None,
            surrogate_fitness: None,
        }
    }

    pub fn real_fitness_calculated(&self) -> bool {
        self.fitness.is_some()
    }

    pub fn clear_fitness(&mut self) {
        self.fitness = None;
        self.surrogate_fitness = None;
    }
}

/// Why a run stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    BudgetExhausted,
    TimeLimitExceeded,
    /// No new real evaluation happened for a very long time, e.g. the search
    /// space has been exhausted.
    Stalled,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::BudgetExhausted => "budget exhausted",
            Termination::TimeLimitExceeded => "time limit exceeded",
            Termination::Stalled => "stalled",
        })
    }
}

/// Failure of a single real evaluation.
#[derive(Clone, Debug, PartialEq)]
pub enum EvalError {
    Stop(Termination),
    NonFinite(String),
}

impl From<Termination> for EvalError {
    fn from(t: Termination) -> Self {
        EvalError::Stop(t)
    }
}

impl From<EvalError> for Error {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Stop(t) => Error::Config(format!("evaluation stopped: {t}")),
            EvalError::NonFinite(key) => Error::NonFiniteFitness(key),
        }
    }
}

/// One elitist step of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryPoint<F> {
    pub real_evals: u64,
    pub elapsed_ms: u64,
    pub fitness: F,
    /// Cache key of the elitist (normalized for label-symmetric problems).
    pub genotype: Genotype,
}

/// Hooks invoked by the ledger while a run progresses.
pub trait RunObserver<F> {
    fn on_elitist_improved(&mut self, _real_evals: u64, _fitness: F, _genotype: &Genotype) {}
    fn on_termination(&mut self, _reason: Termination) {}
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation<F> {
    pub fitness: F,
    /// Served from the cache; no real evaluation was charged.
    pub cached: bool,
    /// The elitist strictly improved with this evaluation.
    pub improved: bool,
}

/// Cache of real fitness values keyed by (normalized) genotype, with the
/// real-evaluation counter, budget and elitist record of one run.
pub struct EvaluationLedger<F: Scalar> {
    cache: HashMap<Genotype, F>,
    real_evals: u64,
    budget: u64,
    normalize: bool,
    elitist: Option<Solution<F>>,
    time_limit: Option<Duration>,
    started: Instant,
    trajectory: Vec<TrajectoryPoint<F>>,
    observer: Option<Box<dyn RunObserver<F> + Send>>,
}

impl<F: Scalar> fmt::Debug for EvaluationLedger<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EvaluationLedger")
            .field("real_evals", &self.real_evals)
            .field("budget", &self.budget)
            .field("normalize", &self.normalize)
            .field("elitist", &self.elitist)
            .finish_non_exhaustive()
    }
}

impl<F: Scalar> EvaluationLedger<F> {
    pub fn new(spec: &ProblemSpec, budget: u64) -> Self {
        Self {
            cache: HashMap::new(),
            real_evals: 0,
            budget,
            normalize: spec.kind.is_label_symmetric(),
            elitist: None,
            time_limit: None,
            started: Instant::now(),
            trajectory: Vec::new(),
            observer: None,
        }
    }

    pub fn with_time_limit(mut self, limit: Option<Duration>) -> Self {
        self.time_limit = limit;
        self
    }

    pub fn with_observer(mut self, observer: Box<dyn RunObserver<F> + Send>) -> Self {
        self.observer = Some(observer);
        self
    }

    pub fn real_evals(&self) -> u64 {
        self.real_evals
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn remaining(&self) -> u64 {
        self.budget.saturating_sub(self.real_evals)
    }

    pub fn elitist(&self) -> Option<&Solution<F>> {
        self.elitist.as_ref()
    }

    pub fn elitist_fitness(&self) -> Option<F> {
        self.elitist.as_ref().and_then(|s| s.fitness)
    }

    pub fn trajectory(&self) -> &[TrajectoryPoint<F>] {
        &self.trajectory
    }

    pub fn elapsed(&self) -> Duration {
        self.started.elapsed()
    }

    pub fn cache_len(&self) -> usize {
        self.cache.len()
    }

    /// Key under which `genotype` is cached.
    pub fn cache_key(&self, genotype: &Genotype) -> Genotype {
        if self.normalize {
            genotype.normalized()
        } else {
            genotype.clone()
        }
    }

    pub fn lookup(&self, genotype: &Genotype) -> Option<F> {
        if self.normalize {
            self.cache.get(&genotype.normalized()).copied()
        } else {
            self.cache.get(genotype).copied()
        }
    }

    /// Returns the reason the run must stop, if any.
    pub fn check_stop(&self) -> Option<Termination> {
        if let Some(limit) = self.time_limit {
            if self.started.elapsed() >= limit {
                return Some(Termination::TimeLimitExceeded);
            }
        }
        if self.real_evals >= self.budget {
            return Some(Termination::BudgetExhausted);
        }
        None
    }

    /// Real fitness of `genotype`: served from the cache when possible,
    /// otherwise computed, charged against the budget and cached.
    pub fn evaluate(
        &mut self,
        genotype: &Genotype,
        f: &dyn FitnessFunction<F>,
    ) -> Result<Evaluation<F>, EvalError> {
        if let Some(limit) = self.time_limit {
            if self.started.elapsed() >= limit {
                return Err(Termination::TimeLimitExceeded.into());
            }
        }
        let key = self.cache_key(genotype);
        if let Some(&fitness) = self.cache.get(&key) {
            return Ok(Evaluation {
                fitness,
                cached: true,
                improved: false,
            });
        }
        if self.real_evals >= self.budget {
            return Err(Termination::BudgetExhausted.into());
        }
        let fitness = f.fitness(genotype);
        if !fitness.is_finite() {
            return Err(EvalError::NonFinite(key.key()));
        }
        self.real_evals += 1;
        self.cache.insert(key.clone(), fitness);
        let improved = self.elitist_fitness().is_none_or(|best| fitness > best);
        if improved {
            let point = TrajectoryPoint {
                real_evals: self.real_evals,
                elapsed_ms: self.started.elapsed().as_millis() as u64,
                fitness,
                genotype: key,
            };
            if let Some(obs) = self.observer.as_mut() {
                obs.on_elitist_improved(point.real_evals, fitness, &point.genotype);
            }
            self.trajectory.push(point);
            self.elitist = Some(Solution {
                genotype: genotype.clone(),
                fitness: Some(fitness),
                surrogate_fitness: None,
            });
        }
        Ok(Evaluation {
            fitness,
            cached: false,
            improved,
        })
    }

    /// Closes the run: appends the terminal trajectory row (when anything was
    /// evaluated), notifies the observer and returns the trajectory.
    pub fn finish(&mut self, reason: Termination) -> Vec<TrajectoryPoint<F>> {
        if let Some(last) = self.trajectory.last().cloned() {
            self.trajectory.push(TrajectoryPoint {
                real_evals: self.real_evals,
                elapsed_ms: self.started.elapsed().as_millis() as u64,
                ..last
            });
        }
        if let Some(obs) = self.observer.as_mut() {
            obs.on_termination(reason);
        }
        std::mem::take(&mut self.trajectory)
    }
}

/// Evaluates `s` with its real fitness through `ledger`.
pub fn evaluate_real<F: Scalar>(
    s: &mut Solution<F>,
    ledger: &mut EvaluationLedger<F>,
    f: &dyn FitnessFunction<F>,
) -> Result<F, EvalError> {
    let eval = ledger.evaluate(&s.genotype, f)?;
    s.fitness = Some(eval.fitness);
    Ok(eval.fitness)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(digits: &str) -> Genotype {
        Genotype::new(digits.bytes().map(|b| (b - b'0') as Gene).collect())
    }

    struct CountZeros(ProblemSpec);

    impl FitnessFunction<f64> for CountZeros {
        fn spec(&self) -> &ProblemSpec {
            &self.0
        }
        fn fitness(&self, genotype: &Genotype) -> f64 {
            genotype.genes().iter().filter(|&&x| x == 0).count() as f64
        }
    }

    struct Nan(ProblemSpec);

    impl FitnessFunction<f64> for Nan {
        fn spec(&self) -> &ProblemSpec {
            &self.0
        }
        fn fitness(&self, _: &Genotype) -> f64 {
            f64::NAN
        }
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(normalize_partition(&g("112200")), g("001122"));
        assert_eq!(normalize_partition(&g("000")), g("000"));
        assert_eq!(normalize_partition(&g("2102")), g("0120"));
    }

    #[test]
    fn normalization_leaves_input_untouched() {
        let original = g("2102");
        let _ = original.normalized();
        assert_eq!(original, g("2102"));
    }

    #[test]
    fn key_round_trip_with_wide_alphabet() {
        let genotype = Genotype::new(vec![0, 11, 3, 10]);
        assert_eq!(genotype.key(), "0,11,3,10");
        assert_eq!(genotype.key().parse::<Genotype>().unwrap(), genotype);
    }

    #[test]
    fn spec_validation() {
        assert!(ProblemSpec::new(0, 2, FitnessKind::CategoricalOnemax).is_err());
        assert!(ProblemSpec::new(3, 1, FitnessKind::CategoricalOnemax).is_err());
        assert!(ProblemSpec::trap(10, 3).is_err());
        assert!(ProblemSpec::new(10, 3, FitnessKind::Trap { block_size: 5 }).is_err());
        assert!(ProblemSpec::trap(10, 5).is_ok());
        let spec = ProblemSpec::onemax(3, 3).unwrap();
        assert!(g("012").validate(&spec).is_ok());
        assert!(g("013").validate(&spec).is_err());
        assert!(g("01").validate(&spec).is_err());
    }

    #[test]
    fn label_swapped_partition_is_a_cache_hit() {
        let spec = ProblemSpec::partition(4, 2).unwrap();
        let f = CountZeros(spec);
        let mut ledger = EvaluationLedger::<f64>::new(&spec, 10);
        let first = ledger.evaluate(&g("1100"), &f).unwrap();
        let second = ledger.evaluate(&g("0011"), &f).unwrap();
        assert!(!first.cached);
        assert!(second.cached);
        assert_eq!(second.fitness, first.fitness);
        assert_eq!(ledger.real_evals(), 1);
    }

    #[test]
    fn distinct_partitions_count_twice() {
        let spec = ProblemSpec::partition(4, 2).unwrap();
        let f = CountZeros(spec);
        let mut ledger = EvaluationLedger::<f64>::new(&spec, 10);
        ledger.evaluate(&g("0011"), &f).unwrap();
        ledger.evaluate(&g("0101"), &f).unwrap();
        assert_eq!(ledger.real_evals(), 2);
    }

    #[test]
    fn synthetic_problems_skip_normalization() {
        let spec = ProblemSpec::onemax(4, 2).unwrap();
        let f = CountZeros(spec);
        let mut ledger = EvaluationLedger::<f64>::new(&spec, 10);
        assert_eq!(ledger.evaluate(&g("1100"), &f).unwrap().fitness, 2.0);
        assert!(!ledger.evaluate(&g("0011"), &f).unwrap().cached);
        assert_eq!(ledger.real_evals(), 2);
    }

    #[test]
    fn budget_exhaustion_on_miss_only() {
        let spec = ProblemSpec::partition(4, 2).unwrap();
        let f = CountZeros(spec);
        let mut ledger = EvaluationLedger::<f64>::new(&spec, 1);
        ledger.evaluate(&g("0011"), &f).unwrap();
        assert_eq!(
            ledger.evaluate(&g("0101"), &f),
            Err(EvalError::Stop(Termination::BudgetExhausted))
        );
        assert!(ledger.evaluate(&g("1100"), &f).unwrap().cached);
        assert_eq!(ledger.real_evals(), 1);
    }

    #[test]
    fn time_limit_stops_evaluation() {
        let spec = ProblemSpec::onemax(4, 2).unwrap();
        let f = CountZeros(spec);
        let mut ledger = EvaluationLedger::<f64>::new(&spec, 10).with_time_limit(Some(Duration::ZERO));
        assert_eq!(
            ledger.evaluate(&g("0011"), &f),
            Err(EvalError::Stop(Termination::TimeLimitExceeded))
        );
    }

    #[test]
    fn nan_is_rejected_and_not_cached() {
        let spec = ProblemSpec::onemax(2, 2).unwrap();
        let f = Nan(spec);
        let mut ledger = EvaluationLedger::<f64>::new(&spec, 10);
        assert!(matches!(
            ledger.evaluate(&g("01"), &f),
            Err(EvalError::NonFinite(_))
        ));
        assert_eq!(ledger.real_evals(), 0);
        assert_eq!(ledger.cache_len(), 0);
    }

    #[test]
    fn elitist_keeps_earlier_on_ties() {
        let spec = ProblemSpec::onemax(3, 2).unwrap();
        let f = CountZeros(spec);
        let mut ledger = EvaluationLedger::<f64>::new(&spec, 10);
        ledger.evaluate(&g("011"), &f).unwrap();
        let tie = ledger.evaluate(&g("101"), &f).unwrap();
        assert!(!tie.improved);
        assert_eq!(ledger.elitist().unwrap().genotype, g("011"));
        assert!(ledger.evaluate(&g("001"), &f).unwrap().improved);
        let trajectory = ledger.finish(Termination::BudgetExhausted);
        let evals: Vec<u64> = trajectory.iter().map(|p| p.real_evals).collect();
        assert_eq!(evals, vec![1, 3, 3]);
    }

    #[test]
    fn evaluate_real_marks_solution() {
        let spec = ProblemSpec::onemax(3, 2).unwrap();
        let f = CountZeros(spec);
        let mut ledger = EvaluationLedger::<f64>::new(&spec, 10);
        let mut s = Solution::new(g("010"));
        assert!(!s.real_fitness_calculated());
        assert_eq!(evaluate_real(&mut s, &mut ledger, &f).unwrap(), 2.0);
        assert!(s.real_fitness_calculated());
    }

    #[test]
    fn observer_sees_improvements() {
        use std::sync::{Arc, Mutex};

        struct Recorder(Arc<Mutex<Vec<String>>>);
        impl RunObserver<f64> for Recorder {
            fn on_elitist_improved(&mut self, evals: u64, fitness: f64, genotype: &Genotype) {
                self.0
                    .lock()
                    .unwrap()
                    .push(format!("{evals}:{fitness}:{genotype}"));
            }
            fn on_termination(&mut self, reason: Termination) {
                self.0.lock().unwrap().push(reason.to_string());
            }
        }

        let log = Arc::new(Mutex::new(Vec::new()));
        let spec = ProblemSpec::partition(3, 2).unwrap();
        let f = CountZeros(spec);
        let mut ledger =
            EvaluationLedger::<f64>::new(&spec, 10).with_observer(Box::new(Recorder(log.clone())));
        ledger.evaluate(&g("110"), &f).unwrap();
        ledger.finish(Termination::Stalled);
        assert_eq!(*log.lock().unwrap(), vec!["1:1:0,0,1", "stalled"]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn genotype_and_permutation() -> impl Strategy<Value = (Vec<Gene>, Vec<Gene>)> {
            (2usize..8).prop_flat_map(|alphabet| {
                (
                    prop::collection::vec(0..alphabet as Gene, 1..40),
                    Just((0..alphabet as Gene).collect::<Vec<_>>()).prop_shuffle(),
                )
            })
        }

        proptest! {
            #[test]
            fn invariant_to_label_permutation((genes, perm) in genotype_and_permutation()) {
                let original = Genotype::new(genes.clone());
                let permuted = Genotype::new(genes.iter().map(|&x| perm[x as usize]).collect());
                prop_assert_eq!(original.normalized(), permuted.normalized());
            }

            #[test]
            fn idempotent((genes, _) in genotype_and_permutation()) {
                let once = Genotype::new(genes).normalized();
                prop_assert_eq!(once.normalized(), once);
            }
        }
    }
}
