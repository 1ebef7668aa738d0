//! The parameter-less population pyramid driving GOM, in plain and
//! surrogate-assisted form.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genotype::{
    evaluate_real, EvalError, EvaluationLedger, FitnessFunction, Genotype, ProblemSpec, RunObserver,
    Solution, Termination, TrajectoryPoint,
};
use crate::gom::{compare_solutions, gom_improve, Evaluator, RealEvaluator};
use crate::linkage::{build_filtered_linkage_tree, estimate_nmi_matrix, Fos, PairCounts};
use crate::scalar::Scalar;
use crate::surrogate::{
    fit_svr_cached, one_hot_encode, train, tune_hyperparameters, FittedRegressor, KernelCache, RandomForest,
    RegressorConfig, RegressorKind, TuningReport, CV_FOLDS,
};

/// Largest per-level pair-count table kept in memory; bigger problems
/// recount from the population columns whenever a linkage tree is needed.
const MAX_PAIR_COUNTERS: usize = 4_000_000;

pub const DEFAULT_ETA: f64 = 0.999;

/// Iterations in a row without a new real evaluation after which a run
/// gives up, e.g. because the reachable space is exhausted.
pub const DEFAULT_STALL_LIMIT: u64 = 50_000;

/// `F` sorted ascending, element at `ceil(lambda |F|) - 1` (clamped).
pub fn set_threshold<F: Scalar>(predictions: &[F], lambda: f64) -> Result<F> {
    if predictions.is_empty() {
        return Err(Error::EmptyArchive);
    }
    let mut sorted = predictions.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite predictions"));
    let n = sorted.len();
    let idx = ((lambda * n as f64).ceil() as isize - 1).clamp(0, n as isize - 1) as usize;
    Ok(sorted[idx])
}

/// The quantile `lambda` used for the gating threshold. Decays by `eta` on
/// every iteration without elitist improvement and snaps back to 1 on
/// improvement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LambdaController {
    lambda: f64,
    eta: f64,
}

impl LambdaController {
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::Config(format!("eta must lie in (0, 1), got {eta}")));
        }
        Ok(Self { lambda: 1.0, eta })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn reset(&mut self) {
        self.lambda = 1.0;
    }

    pub fn decay(&mut self) {
        let next = self.lambda * self.eta;
        if next > 0.0 {
            self.lambda = next;
        }
    }
}

/// Archive of really evaluated solutions and the regressor trained on it.
#[derive(Clone, Debug)]
pub struct SurrogateState<F: Scalar> {
    config: RegressorConfig,
    alphabet: usize,
    scale_targets: bool,
    seed: u64,
    archive: Vec<(Genotype, F)>,
    encoded: Vec<Vec<F>>,
    gram: Option<KernelCache<F>>,
    predictions: Vec<F>,
    controller: LambdaController,
    threshold: F,
    model: FittedRegressor<F>,
    offset: F,
    range: F,
    trained_on: usize,
}

impl<F: Scalar> SurrogateState<F> {
    /// `scale_targets` min-max scales fitness values over the archive before
    /// training; predictions are always reported in fitness units.
    pub fn new(
        config: RegressorConfig,
        alphabet: usize,
        scale_targets: bool,
        eta: f64,
        seed: u64,
    ) -> Result<Self> {
        Ok(Self {
            config,
            alphabet,
            scale_targets,
            seed,
            archive: Vec::new(),
            encoded: Vec::new(),
            gram: None,
            predictions: Vec::new(),
            controller: LambdaController::new(eta)?,
            threshold: F::neg_infinity(),
            model: FittedRegressor::Constant {
                value: F::zero(),
                dim: 0,
            },
            offset: F::zero(),
            range: F::one(),
            trained_on: 0,
        })
    }

    pub fn config(&self) -> &RegressorConfig {
        &self.config
    }

    /// Adds a really evaluated solution. `key` should be the ledger's cache key.
    pub fn push(&mut self, key: Genotype, fitness: F) {
        self.encoded.push(one_hot_encode(&key, self.alphabet));
        self.archive.push((key, fitness));
    }

    pub fn archive(&self) -> &[(Genotype, F)] {
        &self.archive
    }

    pub fn predictions(&self) -> &[F] {
        &self.predictions
    }

    pub fn lambda(&self) -> f64 {
        self.controller.lambda()
    }

    pub fn controller(&self) -> &LambdaController {
        &self.controller
    }

    pub fn controller_mut(&mut self) -> &mut LambdaController {
        &mut self.controller
    }

    pub fn threshold(&self) -> F {
        self.threshold
    }

    pub fn model(&self) -> &FittedRegressor<F> {
        &self.model
    }

    /// Surrogate fitness of `key`, in fitness units.
    pub fn predict(&self, key: &Genotype) -> F {
        let x = one_hot_encode(key, self.alphabet);
        self.predict_encoded(&x)
    }

    fn predict_encoded(&self, x: &[F]) -> F {
        let raw = self.model.predict(x).expect("encoding width is fixed per run");
        raw * self.range + self.offset
    }

    fn targets(&mut self) -> Vec<F> {
        let ys: Vec<F> = self.archive.iter().map(|(_, y)| *y).collect();
        if !self.scale_targets {
            self.offset = F::zero();
            self.range = F::one();
            return ys;
        }
        let lo = ys.iter().copied().fold(F::infinity(), F::min);
        let hi = ys.iter().copied().fold(F::neg_infinity(), F::max);
        self.offset = lo;
        self.range = if hi > lo { hi - lo } else { F::one() };
        ys.iter().map(|&y| (y - self.offset) / self.range).collect()
    }

    /// Refits the regressor on the archive, recomputes the archive predictions
    /// and the threshold. Refitting on an unchanged archive reproduces the
    /// same model, so it is skipped.
    pub fn retrain(&mut self) -> Result<()> {
        if self.archive.is_empty() {
            return Err(Error::EmptyArchive);
        }
        if self.trained_on != self.archive.len() {
            self.fit()?;
            self.trained_on = self.archive.len();
        }
        self.threshold = set_threshold(&self.predictions, self.controller.lambda())?;
        Ok(())
    }

    /// Recomputes the threshold from the current predictions and `lambda`.
    pub fn refresh_threshold(&mut self) -> Result<()> {
        self.threshold = set_threshold(&self.predictions, self.controller.lambda())?;
        Ok(())
    }

    fn fit(&mut self) -> Result<()> {
        let ys = self.targets();
        let dim = self.encoded[0].len();
        if ys.len() < 2 || ys.iter().all(|&y| y == ys[0]) {
            self.model = FittedRegressor::Constant { value: ys[0], dim };
            self.predictions = vec![ys[0] * self.range + self.offset; ys.len()];
            return Ok(());
        }
        match self.config {
            RegressorConfig::Svr(params) => {
                let gram = self
                    .gram
                    .get_or_insert_with(|| KernelCache::for_params(&params, dim));
                for x in &self.encoded[gram.len()..] {
                    gram.push(x);
                }
                let fit = fit_svr_cached(&params, gram, &ys);
                self.predictions = fit
                    .train_predictions
                    .iter()
                    .map(|&p| p * self.range + self.offset)
                    .collect();
                self.model = FittedRegressor::Svr(fit.model);
            }
            RegressorConfig::RandomForest(params) => {
                self.model =
                    FittedRegressor::Forest(RandomForest::fit(&params, &self.encoded, &ys, self.seed));
                self.predictions = self.encoded.iter().map(|x| self.predict_encoded(x)).collect();
            }
        }
        Ok(())
    }
}

/// Predicts `x`, then really evaluates it when it is already cached or its
/// prediction beats the threshold. New real evaluations join the archive and
/// an elitist improvement resets `lambda` to 1.
pub fn sa_evaluate<F: Scalar>(
    x: &mut Solution<F>,
    state: &mut SurrogateState<F>,
    ledger: &mut EvaluationLedger<F>,
    f: &dyn FitnessFunction<F>,
) -> Result<(), EvalError> {
    let key = ledger.cache_key(&x.genotype);
    let predicted = state.predict(&key);
    x.surrogate_fitness = Some(predicted);
    if let Some(cached) = ledger.lookup(&x.genotype) {
        x.fitness = Some(cached);
        return Ok(());
    }
    if predicted > state.threshold {
        let eval = ledger.evaluate(&x.genotype, f)?;
        x.fitness = Some(eval.fitness);
        if !eval.cached {
            state.push(key, eval.fitness);
        }
        if eval.improved {
            state.controller.reset();
        }
    }
    Ok(())
}

pub struct SurrogateEvaluator<'a, F: Scalar> {
    pub state: &'a mut SurrogateState<F>,
    pub ledger: &'a mut EvaluationLedger<F>,
    pub fitness: &'a dyn FitnessFunction<F>,
}

impl<F: Scalar> Evaluator<F> for SurrogateEvaluator<'_, F> {
    fn evaluate(&mut self, solution: &mut Solution<F>) -> Result<(), EvalError> {
        sa_evaluate(solution, self.state, self.ledger, self.fitness)
    }
}

#[derive(Clone, Debug)]
struct Level<F> {
    members: Vec<Solution<F>>,
    seen: HashSet<Genotype>,
    counts: Option<PairCounts>,
}

/// Levels of solutions; each level holds distinct genotypes.
#[derive(Clone, Debug)]
pub struct Pyramid<F> {
    num_vars: usize,
    alphabet: usize,
    levels: Vec<Level<F>>,
}

impl<F: Scalar> Pyramid<F> {
    pub fn new(spec: &ProblemSpec) -> Self {
        Self {
            num_vars: spec.num_vars,
            alphabet: spec.alphabet_size,
            levels: Vec::new(),
        }
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, i: usize) -> &[Solution<F>] {
        &self.levels[i].members
    }

    pub fn len(&self) -> usize {
        self.levels.iter().map(|l| l.members.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn contains(&self, level: usize, genotype: &Genotype) -> bool {
        self.levels.get(level).is_some_and(|l| l.seen.contains(genotype))
    }

    /// Stores `solution` at `level`, appending that level if it is the next
    /// one. Returns false for a genotype already present there.
    pub fn add(&mut self, level: usize, solution: Solution<F>) -> bool {
        assert!(level <= self.levels.len(), "levels are appended one at a time");
        if level == self.levels.len() {
            let counts = (PairCounts::footprint(self.num_vars, self.alphabet) <= MAX_PAIR_COUNTERS)
                .then(|| PairCounts::new(self.num_vars, self.alphabet));
            self.levels.push(Level {
                members: Vec::new(),
                seen: HashSet::new(),
                counts,
            });
        }
        let l = &mut self.levels[level];
        if !l.seen.insert(solution.genotype.clone()) {
            return false;
        }
        if let Some(c) = l.counts.as_mut() {
            c.add(&solution.genotype);
        }
        l.members.push(solution);
        true
    }

    /// Filtered linkage tree learned from the population of `level`.
    pub fn linkage<R: Rng + ?Sized>(&self, level: usize, rng: &mut R) -> Result<Fos> {
        let l = &self.levels[level];
        let nmi = match &l.counts {
            Some(c) => c.nmi_matrix::<F>(),
            None => {
                let pop: Vec<&Genotype> = l.members.iter().map(|s| &s.genotype).collect();
                estimate_nmi_matrix(&pop)?
            }
        };
        Ok(build_filtered_linkage_tree(&nmi, rng))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationReport {
    /// Set when the ledger refused a real evaluation.
    pub stop: Option<Termination>,
    pub elitist_improved: bool,
    pub levels_climbed: usize,
}

fn stop_reason(e: EvalError) -> Result<Termination> {
    match e {
        EvalError::Stop(t) => Ok(t),
        other => Err(other.into()),
    }
}

/// One pyramid iteration: a new random solution enters level 0 and climbs
/// while GOM strictly improves it.
pub fn p3_iteration<F: Scalar, R: Rng + ?Sized>(
    pyramid: &mut Pyramid<F>,
    mut state: Option<&mut SurrogateState<F>>,
    ledger: &mut EvaluationLedger<F>,
    f: &dyn FitnessFunction<F>,
    rng: &mut R,
) -> Result<IterationReport> {
    let before = ledger.elitist_fitness();
    let mut report = IterationReport {
        stop: None,
        elitist_improved: false,
        levels_climbed: 0,
    };
    let mut current = Solution::new(Genotype::random(f.spec(), rng));
    let first = match state.as_deref_mut() {
        None => evaluate_real(&mut current, ledger, f).map(|_| ()),
        Some(s) => sa_evaluate(&mut current, s, ledger, f),
    };
    if let Err(e) = first {
        report.stop = Some(stop_reason(e)?);
        return Ok(report);
    }
    if pyramid.add(0, current.clone()) {
        let mut level = 0;
        while level < pyramid.num_levels() {
            let fos = pyramid.linkage(level, rng)?;
            let outcome = {
                let donors = &pyramid.levels[level].members;
                match state.as_deref_mut() {
                    None => gom_improve(
                        &current,
                        donors,
                        &fos,
                        &mut RealEvaluator { ledger, fitness: f },
                        rng,
                    )?,
                    Some(s) => gom_improve(
                        &current,
                        donors,
                        &fos,
                        &mut SurrogateEvaluator {
                            state: s,
                            ledger,
                            fitness: f,
                        },
                        rng,
                    )?,
                }
            };
            if let Some(e) = outcome.stopped {
                report.stop = Some(stop_reason(e)?);
                break;
            }
            if compare_solutions(&outcome.solution, &current)? != Ordering::Greater {
                break;
            }
            current = outcome.solution;
            level += 1;
            report.levels_climbed = level;
            pyramid.add(level, current.clone());
        }
    }
    let after = ledger.elitist_fitness();
    report.elitist_improved = match (before, after) {
        (None, Some(_)) => true,
        (Some(b), Some(a)) => a > b,
        _ => false,
    };
    if let Some(s) = state {
        if report.elitist_improved {
            s.controller.reset();
        } else {
            s.controller.decay();
        }
        s.retrain()?;
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SearchMode {
    Plain,
    Surrogate { kind: RegressorKind, eta: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunSettings {
    pub budget: u64,
    pub seed: u64,
    pub time_limit: Option<Duration>,
    pub stall_limit: u64,
}

impl RunSettings {
    pub fn new(budget: u64, seed: u64) -> Self {
        Self {
            budget,
            seed,
            time_limit: None,
            stall_limit: DEFAULT_STALL_LIMIT,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome<F> {
    pub trajectory: Vec<TrajectoryPoint<F>>,
    pub termination: Termination,
    pub real_evals: u64,
    pub elitist: Option<Solution<F>>,
    pub iterations: u64,
    pub tuning: Option<TuningReport>,
    /// Final quantile; `None` in plain mode.
    pub lambda: Option<f64>,
}

impl<F: Scalar> RunOutcome<F> {
    pub fn best_fitness(&self) -> Option<F> {
        self.elitist.as_ref().and_then(|s| s.fitness)
    }
}

/// Evaluates up to `num_vars` random solutions with pairwise distinct cache
/// keys. Collisions are redrawn, with at most `100 num_vars` draws in total.
fn initial_archive<F: Scalar, R: Rng + ?Sized>(
    state: &mut SurrogateState<F>,
    ledger: &mut EvaluationLedger<F>,
    f: &dyn FitnessFunction<F>,
    rng: &mut R,
) -> Result<Option<Termination>> {
    let n = f.spec().num_vars;
    let mut seen = HashSet::new();
    let mut attempts = 0;
    while seen.len() < n && attempts < 100 * n {
        attempts += 1;
        let g = Genotype::random(f.spec(), rng);
        let key = ledger.cache_key(&g);
        if !seen.insert(key.clone()) {
            continue;
        }
        match ledger.evaluate(&g, f) {
            Ok(eval) => {
                if !eval.cached {
                    state.push(key, eval.fitness);
                }
            }
            Err(e) => return stop_reason(e).map(Some),
        }
    }
    Ok(None)
}

/// Runs P3-GOMEA (plain mode) or SA-P3-GOMEA (surrogate mode) until the
/// budget, the time limit or the stall limit ends it.
pub fn run<F: Scalar>(
    f: &dyn FitnessFunction<F>,
    mode: SearchMode,
    settings: RunSettings,
    observer: Option<Box<dyn RunObserver<F> + Send>>,
) -> Result<RunOutcome<F>> {
    let spec = *f.spec();
    if settings.budget == 0 {
        return Err(Error::Config("budget must be positive".into()));
    }
    let mut ledger = EvaluationLedger::new(&spec, settings.budget).with_time_limit(settings.time_limit);
    if let Some(obs) = observer {
        ledger = ledger.with_observer(obs);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut pyramid = Pyramid::new(&spec);
    let mut state = None;
    let mut tuning = None;
    let mut stop = None;

    if let SearchMode::Surrogate { kind, eta } = mode {
        if settings.budget < spec.num_vars as u64 {
            return Err(Error::Config(format!(
                "surrogate mode needs a budget of at least {} for initialization, got {}",
                spec.num_vars, settings.budget
            )));
        }
        LambdaController::new(eta)?;
        let model_seed: u64 = rng.random();
        let mut s = SurrogateState::new(
            kind.grid()[0],
            spec.alphabet_size,
            !spec.kind.is_label_symmetric(),
            eta,
            model_seed,
        )?;
        stop = initial_archive(&mut s, &mut ledger, f, &mut rng)?;
        if s.archive().is_empty() {
            let reason = stop.unwrap_or(Termination::Stalled);
            return Ok(finish(ledger, reason, 0, None, None));
        }
        let ys = s.targets();
        if ys.len() >= CV_FOLDS {
            let report = tune_hyperparameters(kind, &s.encoded, &ys, model_seed)?;
            s.config = report.best;
            tuning = Some(report);
        }
        s.retrain()?;
        state = Some(s);
    }

    let mut iterations = 0;
    let mut idle = 0;
    let reason = loop {
        if let Some(t) = stop.or_else(|| ledger.check_stop()) {
            break t;
        }
        if idle >= settings.stall_limit {
            break Termination::Stalled;
        }
        let evals = ledger.real_evals();
        let report = p3_iteration(&mut pyramid, state.as_mut(), &mut ledger, f, &mut rng)?;
        iterations += 1;
        idle = if ledger.real_evals() > evals { 0 } else { idle + 1 };
        stop = report.stop;
    };
    let lambda = state.as_ref().map(|s| s.lambda());
    Ok(finish(ledger, reason, iterations, tuning, lambda))
}

fn finish<F: Scalar>(
    mut ledger: EvaluationLedger<F>,
    reason: Termination,
    iterations: u64,
    tuning: Option<TuningReport>,
    lambda: Option<f64>,
) -> RunOutcome<F> {
    let trajectory = ledger.finish(reason);
    RunOutcome {
        trajectory,
        termination: reason,
        real_evals: ledger.real_evals(),
        elitist: ledger.elitist().cloned(),
        iterations,
        tuning,
        lambda,
    }
}

/// Trains a one-off surrogate on `(genotype, fitness)` pairs with the given
/// configuration. Mostly useful for inspection and tests.
pub fn fit_surrogate<F: Scalar>(
    config: &RegressorConfig,
    samples: &[(Genotype, F)],
    alphabet: usize,
    seed: u64,
) -> Result<FittedRegressor<F>> {
    let xs: Vec<Vec<F>> = samples.iter().map(|(g, _)| one_hot_encode(g, alphabet)).collect();
    let ys: Vec<F> = samples.iter().map(|(_, y)| *y).collect();
    Ok(train(config, &xs, &ys, seed)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{CategoricalOnemax, Trap};

    #[test]
    fn threshold_examples() {
        let f = [0.3, 0.1, 0.4, 0.2];
        assert_eq!(set_threshold(&f, 1.0).unwrap(), 0.4);
        assert_eq!(set_threshold(&f, 0.5).unwrap(), 0.2);
        assert_eq!(set_threshold(&[0.7], 0.01).unwrap(), 0.7);
        assert_eq!(set_threshold(&[0.7], 1.0).unwrap(), 0.7);
        assert!(matches!(set_threshold::<f64>(&[], 1.0), Err(Error::EmptyArchive)));
    }

    #[test]
    fn lambda_decays_and_resets() {
        let mut c = LambdaController::new(0.999).unwrap();
        c.decay();
        assert_eq!(c.lambda(), 0.999);
        c.decay();
        assert_eq!(c.lambda(), 0.999 * 0.999);
        c.reset();
        assert_eq!(c.lambda(), 1.0);
        assert!(LambdaController::new(1.0).is_err());
        assert!(LambdaController::new(0.0).is_err());
    }

    fn trained_state(
        threshold_lambda: f64,
    ) -> (SurrogateState<f64>, EvaluationLedger<f64>, CategoricalOnemax) {
        let spec = ProblemSpec::onemax(4, 2).unwrap();
        let f = CategoricalOnemax::new(spec);
        let mut ledger = EvaluationLedger::new(&spec, 100);
        let mut s = SurrogateState::new(RegressorKind::Svr.grid()[0], 2, true, 0.999, 0).unwrap();
        for genes in [[0, 0, 1, 1], [1, 1, 1, 1], [0, 1, 1, 1], [1, 1, 1, 0]] {
            let g = Genotype::new(genes.to_vec());
            let e = ledger.evaluate(&g, &f).unwrap();
            s.push(g, e.fitness);
        }
        s.controller.lambda = threshold_lambda;
        s.retrain().unwrap();
        (s, ledger, f)
    }

    #[test]
    fn gating_rule() {
        let (mut s, mut ledger, f) = trained_state(1.0);
        let before = ledger.real_evals();
        // Force a threshold below and above any prediction.
        s.threshold = f64::NEG_INFINITY;
        let mut x = Solution::new(Genotype::new(vec![0, 0, 0, 0]));
        sa_evaluate(&mut x, &mut s, &mut ledger, &f).unwrap();
        assert!(x.real_fitness_calculated());
        assert_eq!(ledger.real_evals(), before + 1);
        assert_eq!(s.archive().len(), 5);
        assert_eq!(s.lambda(), 1.0);

        s.threshold = f64::INFINITY;
        let mut y = Solution::new(Genotype::new(vec![1, 0, 1, 0]));
        sa_evaluate(&mut y, &mut s, &mut ledger, &f).unwrap();
        assert!(!y.real_fitness_calculated());
        assert!(y.surrogate_fitness.is_some());
        assert_eq!(s.archive().len(), 5);

        // A cached genotype always gets its real fitness.
        let mut z = Solution::new(Genotype::new(vec![1, 1, 1, 1]));
        sa_evaluate(&mut z, &mut s, &mut ledger, &f).unwrap();
        assert_eq!(z.fitness, Some(0.0));
        assert_eq!(ledger.real_evals(), before + 1);
    }

    #[test]
    fn improvement_resets_lambda() {
        let (mut s, mut ledger, f) = trained_state(1.0);
        s.controller.lambda = 0.5;
        s.threshold = f64::NEG_INFINITY;
        let mut x = Solution::new(Genotype::new(vec![0, 0, 0, 0]));
        sa_evaluate(&mut x, &mut s, &mut ledger, &f).unwrap();
        assert_eq!(x.fitness, Some(4.0));
        assert_eq!(s.lambda(), 1.0);
    }

    #[test]
    fn predictions_stay_in_fitness_units() {
        let (s, _, _) = trained_state(1.0);
        assert_eq!(s.predictions().len(), 4);
        for (p, (_, y)) in s.predictions().iter().zip(s.archive()) {
            assert!((p - y).abs() < 1.5, "{p} vs {y}");
        }
        assert_eq!(s.threshold(), set_threshold(s.predictions(), 1.0).unwrap());
    }

    #[test]
    fn first_iteration_fills_level_zero() {
        let spec = ProblemSpec::trap(10, 5).unwrap();
        let f = Trap::new(spec);
        let mut ledger = EvaluationLedger::<f64>::new(&spec, 100);
        let mut pyramid = Pyramid::new(&spec);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let report = p3_iteration(&mut pyramid, None, &mut ledger, &f, &mut rng).unwrap();
        assert_eq!(pyramid.num_levels(), 1);
        assert_eq!(pyramid.level(0).len(), 1);
        assert_eq!(ledger.real_evals(), 1);
        assert!(report.elitist_improved);
    }

    #[test]
    fn stagnating_iterations_decay_lambda() {
        let spec = ProblemSpec::onemax(4, 2).unwrap();
        let f = CategoricalOnemax::new(spec);
        let (mut s, mut ledger, _) = trained_state(1.0);
        // The optimum is already the elitist, so nothing can improve.
        ledger.evaluate(&Genotype::zeros(4), &f).unwrap();
        let mut pyramid = Pyramid::new(&spec);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        p3_iteration(&mut pyramid, Some(&mut s), &mut ledger, &f, &mut rng).unwrap();
        assert_eq!(s.lambda(), 0.999);
        p3_iteration(&mut pyramid, Some(&mut s), &mut ledger, &f, &mut rng).unwrap();
        assert_eq!(s.lambda(), 0.999 * 0.999);
    }

    #[test]
    fn promotion_requires_strict_improvement() {
        let spec = ProblemSpec::trap(10, 5).unwrap();
        let f = Trap::new(spec);
        let mut ledger = EvaluationLedger::new(&spec, 2000);
        let mut pyramid: Pyramid<f64> = Pyramid::new(&spec);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..60 {
            if p3_iteration(&mut pyramid, None, &mut ledger, &f, &mut rng)
                .unwrap()
                .stop
                .is_some()
            {
                break;
            }
        }
        assert!(pyramid.num_levels() >= 2);
        for level in 0..pyramid.num_levels() {
            let genes: HashSet<&Genotype> = pyramid.level(level).iter().map(|s| &s.genotype).collect();
            assert_eq!(genes.len(), pyramid.level(level).len());
        }
    }

    #[test]
    fn plain_run_solves_small_trap() {
        let spec = ProblemSpec::trap(10, 5).unwrap();
        let f = Trap::new(spec);
        let out = run::<f64>(&f, SearchMode::Plain, RunSettings::new(5000, 11), None).unwrap();
        assert_eq!(out.best_fitness(), Some(10.0));
        let again = run::<f64>(&f, SearchMode::Plain, RunSettings::new(5000, 11), None).unwrap();
        let strip = |t: &[TrajectoryPoint<f64>]| -> Vec<(u64, f64, Genotype)> {
            t.iter()
                .map(|p| (p.real_evals, p.fitness, p.genotype.clone()))
                .collect()
        };
        assert_eq!(strip(&out.trajectory), strip(&again.trajectory));
    }

    #[test]
    fn surrogate_budget_equal_to_length_only_initializes() {
        let spec = ProblemSpec::trap(10, 5).unwrap();
        let f = Trap::new(spec);
        let mode = SearchMode::Surrogate {
            kind: RegressorKind::Svr,
            eta: DEFAULT_ETA,
        };
        let out = run::<f64>(&f, mode, RunSettings::new(10, 1), None).unwrap();
        assert_eq!(out.real_evals, 10);
        assert_eq!(out.iterations, 0);
        assert_eq!(out.termination, Termination::BudgetExhausted);
        assert_eq!(out.tuning.as_ref().unwrap().candidates.len(), 2);
        assert!(matches!(
            run::<f64>(&f, mode, RunSettings::new(9, 1), None),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn surrogate_run_respects_budget() {
        let spec = ProblemSpec::trap(10, 5).unwrap();
        let f = Trap::new(spec);
        let mode = SearchMode::Surrogate {
            kind: RegressorKind::RandomForest,
            eta: DEFAULT_ETA,
        };
        let out = run::<f64>(&f, mode, RunSettings::new(200, 4), None).unwrap();
        assert!(out.real_evals <= 200);
        let l = out.lambda.unwrap();
        assert!(l > 0.0 && l <= 1.0);
        for w in out.trajectory.windows(2) {
            assert!(w[0].real_evals <= w[1].real_evals);
            assert!(w[0].fitness <= w[1].fitness);
        }
    }
}
