//! Gene-pool optimal mixing and the mixed real/surrogate comparison.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::genotype::{evaluate_real, EvalError, EvaluationLedger, FitnessFunction, Genotype, Solution};
use crate::linkage::Fos;
use crate::scalar::Scalar;

/// Compares on real fitness when both solutions have one, otherwise on
/// surrogate fitness.
pub fn compare_solutions<F: Scalar>(x: &Solution<F>, y: &Solution<F>) -> Result<Ordering> {
    let (a, b) = match (x.fitness, y.fitness) {
        (Some(a), Some(b)) => (a, b),
        _ => (
            x.surrogate_fitness.ok_or(Error::MissingFitness("surrogate"))?,
            y.surrogate_fitness.ok_or(Error::MissingFitness("surrogate"))?,
        ),
    };
    Ok(if a > b {
        Ordering::Greater
    } else if a < b {
        Ordering::Less
    } else {
        Ordering::Equal
    })
}

/// Assigns whatever fitness information a search mode uses to a solution
/// whose genes just changed.
pub trait Evaluator<F: Scalar> {
    fn evaluate(&mut self, solution: &mut Solution<F>) -> Result<(), EvalError>;
}

/// Plain mode: every evaluation is a (cache-aware) real evaluation.
pub struct RealEvaluator<'a, F: Scalar> {
    pub ledger: &'a mut EvaluationLedger<F>,
    pub fitness: &'a dyn FitnessFunction<F>,
}

impl<F: Scalar> Evaluator<F> for RealEvaluator<'_, F> {
    fn evaluate(&mut self, solution: &mut Solution<F>) -> Result<(), EvalError> {
        evaluate_real(solution, self.ledger, self.fitness).map(|_| ())
    }
}

#[derive(Clone, Debug)]
pub struct GomOutcome<F> {
    pub solution: Solution<F>,
    /// Calls made to the evaluator.
    pub evaluations: usize,
    /// At least one donor copy was accepted.
    pub changed: bool,
    /// Set when the evaluator refused to continue; `solution` is then the
    /// last accepted state.
    pub stopped: Option<EvalError>,
}

/// Improves a copy of `p` by copying donor genes subset by subset.
///
/// Subsets are visited smallest first (equal sizes in random order). For each
/// subset the donors are visited in a fresh random order until one differs
/// from the current solution on that subset; its genes are copied and kept
/// unless the result compares worse than before. Only one differing donor is
/// tried per subset.
pub fn gom_improve<F, D, E, R>(
    p: &Solution<F>,
    donors: &[D],
    fos: &Fos,
    eval: &mut E,
    rng: &mut R,
) -> Result<GomOutcome<F>>
where
    F: Scalar,
    D: AsRef<Genotype>,
    E: Evaluator<F> + ?Sized,
    R: Rng + ?Sized,
{
    let mut outcome = GomOutcome {
        solution: p.clone(),
        evaluations: 0,
        changed: false,
        stopped: None,
    };
    if donors.is_empty() {
        return Ok(outcome);
    }
    let mut order: Vec<usize> = (0..fos.len()).collect();
    order.shuffle(rng);
    order.sort_by_key(|&i| fos.subsets()[i].len());

    let mut donor_order: Vec<usize> = (0..donors.len()).collect();
    let o = &mut outcome.solution;
    for i in order {
        let subset = &fos.subsets()[i];
        let Some(donor) = next_differing_donor(donors, &mut donor_order, subset, &o.genotype, rng) else {
            continue;
        };
        let backup = o.clone();
        {
            let genes = o.genotype.genes_mut();
            for &v in subset {
                genes[v] = donor.genes()[v];
            }
        }
        o.clear_fitness();
        if let Err(e) = eval.evaluate(o) {
            *o = backup;
            outcome.stopped = Some(e);
            break;
        }
        outcome.evaluations += 1;
        if compare_solutions(o, &backup)? != Ordering::Less {
            outcome.changed = true;
        } else {
            *o = backup;
        }
    }
    Ok(outcome)
}

/// Lazily draws a uniformly random donor order (partial Fisher-Yates) and
/// returns the first donor that differs from `current` on `subset`.
fn next_differing_donor<'d, D, R>(
    donors: &'d [D],
    order: &mut [usize],
    subset: &[usize],
    current: &Genotype,
    rng: &mut R,
) -> Option<&'d Genotype>
where
    D: AsRef<Genotype>,
    R: Rng + ?Sized,
{
    let n = order.len();
    let current = current.genes();
    for j in 0..n {
        let r = rng.random_range(j..n);
        order.swap(j, r);
        let donor = donors[order[j]].as_ref();
        if subset.iter().any(|&v| donor.genes()[v] != current[v]) {
            return Some(donor);
        }
    }
    None
}

impl<F> AsRef<Genotype> for Solution<F> {
    fn as_ref(&self) -> &Genotype {
        &self.genotype
    }
}

impl AsRef<Genotype> for Genotype {
    fn as_ref(&self) -> &Genotype {
        self
    }
}
