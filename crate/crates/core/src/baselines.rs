//! Random search and random-restart first-improvement local search.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::genotype::{
    EvalError, EvaluationLedger, FitnessFunction, Gene, Genotype, RunObserver, Termination,
};
use crate::pyramid::{RunOutcome, RunSettings};
use crate::scalar::Scalar;

fn stop_reason(e: EvalError) -> Result<Termination> {
    match e {
        EvalError::Stop(t) => Ok(t),
        other => Err(other.into()),
    }
}

/// Samples uniform genotypes until the ledger stops the run. Gives up with
/// [`Termination::Stalled`] after `stall_limit` consecutive cache hits.
pub fn random_search<F: Scalar>(
    ledger: &mut EvaluationLedger<F>,
    f: &dyn FitnessFunction<F>,
    seed: u64,
    stall_limit: u64,
) -> Result<Termination> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idle = 0;
    loop {
        if let Some(t) = ledger.check_stop() {
            return Ok(t);
        }
        if idle >= stall_limit {
            return Ok(Termination::Stalled);
        }
        let g = Genotype::random(f.spec(), &mut rng);
        match ledger.evaluate(&g, f) {
            Ok(e) if e.cached => idle += 1,
            Ok(_) => idle = 0,
            Err(e) => return stop_reason(e),
        }
    }
}

/// Statistics of one local-search restart.
#[derive(Clone, Debug, PartialEq)]
pub struct Restart<F> {
    pub start: Genotype,
    pub end: Genotype,
    pub fitness: F,
    /// Real evaluations charged during this restart.
    pub real_evals: u64,
    pub sweeps: usize,
    /// The restart ran to a local optimum (rather than being cut off).
    pub converged: bool,
}

/// One restart from a uniformly random genotype.
pub fn local_search_restart<F: Scalar, R: rand::Rng + ?Sized>(
    ledger: &mut EvaluationLedger<F>,
    f: &dyn FitnessFunction<F>,
    rng: &mut R,
) -> Result<(Restart<F>, Option<Termination>)> {
    let start = Genotype::random(f.spec(), rng);
    local_search_from(start, ledger, f, rng)
}

/// Sweeps the variables in a fresh random order, trying every other value in
/// ascending order and keeping strict improvements at once, until a sweep
/// improves nothing.
pub fn local_search_from<F: Scalar, R: rand::Rng + ?Sized>(
    start: Genotype,
    ledger: &mut EvaluationLedger<F>,
    f: &dyn FitnessFunction<F>,
    rng: &mut R,
) -> Result<(Restart<F>, Option<Termination>)> {
    let spec = f.spec();
    let evals_before = ledger.real_evals();
    let mut restart = Restart {
        start: start.clone(),
        end: start.clone(),
        fitness: F::neg_infinity(),
        real_evals: 0,
        sweeps: 0,
        converged: false,
    };
    let mut current = start;
    let mut fitness = match ledger.evaluate(&current, f) {
        Ok(e) => e.fitness,
        Err(e) => return Ok((restart, Some(stop_reason(e)?))),
    };
    let mut order: Vec<usize> = (0..spec.num_vars).collect();
    let mut stop = None;
    'sweeps: loop {
        restart.sweeps += 1;
        let mut improved = false;
        order.shuffle(rng);
        for &v in &order {
            for j in 0..spec.alphabet_size as Gene {
                if j == current.genes()[v] {
                    continue;
                }
                let mut neighbour = current.clone();
                neighbour.genes_mut()[v] = j;
                match ledger.evaluate(&neighbour, f) {
                    Ok(e) if e.fitness > fitness => {
                        current = neighbour;
                        fitness = e.fitness;
                        improved = true;
                    }
                    Ok(_) => {}
                    Err(e) => {
                        stop = Some(stop_reason(e)?);
                        break 'sweeps;
                    }
                }
            }
        }
        if !improved {
            restart.converged = true;
            break;
        }
    }
    restart.end = current;
    restart.fitness = fitness;
    restart.real_evals = ledger.real_evals() - evals_before;
    Ok((restart, stop))
}

/// Random-restart local search until the ledger stops the run, or until
/// `stall_limit` restarts in a row charged no real evaluation.
pub fn local_search<F: Scalar>(
    ledger: &mut EvaluationLedger<F>,
    f: &dyn FitnessFunction<F>,
    seed: u64,
    stall_limit: u64,
) -> Result<Termination> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idle = 0;
    loop {
        if let Some(t) = ledger.check_stop() {
            return Ok(t);
        }
        if idle >= stall_limit {
            return Ok(Termination::Stalled);
        }
        let (restart, stop) = local_search_restart(ledger, f, &mut rng)?;
        if let Some(t) = stop {
            return Ok(t);
        }
        idle = if restart.real_evals == 0 { idle + 1 } else { 0 };
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Baseline {
    RandomSearch,
    LocalSearch,
}

pub fn run_baseline<F: Scalar>(
    baseline: Baseline,
    f: &dyn FitnessFunction<F>,
    settings: RunSettings,
    observer: Option<Box<dyn RunObserver<F> + Send>>,
) -> Result<RunOutcome<F>> {
    let mut ledger = EvaluationLedger::new(f.spec(), settings.budget).with_time_limit(settings.time_limit);
    if let Some(obs) = observer {
        ledger = ledger.with_observer(obs);
    }
    let termination = match baseline {
        Baseline::RandomSearch => random_search(&mut ledger, f, settings.seed, settings.stall_limit)?,
        Baseline::LocalSearch => local_search(&mut ledger, f, settings.seed, settings.stall_limit)?,
    };
    let trajectory = ledger.finish(termination);
    Ok(RunOutcome {
        trajectory,
        termination,
        real_evals: ledger.real_evals(),
        elitist: ledger.elitist().cloned(),
        iterations: 0,
        tuning: None,
        lambda: None,
    })
}
