use crate::error::Result;
use crate::genotype::{FitnessFunction, FitnessKind, Gene, Genotype, ProblemSpec};
use crate::scalar::Scalar;

use super::ProblemError;

/// Concatenated deceptive trap: a block of `k` ones scores `k`, any other
/// block scores `k - 1 - ones`.
pub fn trap_fitness<F: Scalar>(genes: &[Gene], block_size: usize) -> Result<F, ProblemError> {
    if block_size == 0 || !genes.len().is_multiple_of(block_size) {
        return Err(ProblemError::BadBlockSize {
            block_size,
            len: genes.len(),
        });
    }
    let k = block_size;
    let total: usize = genes
        .chunks(k)
        .map(|block| {
            let ones = block.iter().filter(|&&g| g == 1).count();
            if ones == k {
                k
            } else {
                k - 1 - ones
            }
        })
        .sum();
    Ok(F::of_usize(total))
}

pub fn categorical_onemax_fitness<F: Scalar>(genes: &[Gene]) -> F {
    F::of_usize(genes.iter().filter(|&&g| g == 0).count())
}

#[derive(Clone, Debug)]
pub struct Trap {
    spec: ProblemSpec,
    block_size: usize,
}

impl Trap {
    /// Panics if `spec` is not a trap specification; `ProblemSpec::trap`
    /// already guarantees the block size divides the length.
    pub fn new(spec: ProblemSpec) -> Self {
        Self::try_new(spec).expect("trap problem spec")
    }

    pub fn try_new(spec: ProblemSpec) -> Result<Self> {
        match spec.kind {
            FitnessKind::Trap { block_size } => Ok(Self { spec, block_size }),
            _ => Err(ProblemError::KindMismatch.into()),
        }
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn optimum(&self) -> usize {
        self.spec.num_vars
    }
}

impl<F: Scalar> FitnessFunction<F> for Trap {
    fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    fn fitness(&self, genotype: &Genotype) -> F {
        trap_fitness(genotype.genes(), self.block_size).expect("validated block size")
    }
}

#[derive(Clone, Debug)]
pub struct CategoricalOnemax {
    spec: ProblemSpec,
}

impl CategoricalOnemax {
    pub fn new(spec: ProblemSpec) -> Self {
        Self { spec }
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }
}

impl<F: Scalar> FitnessFunction<F> for CategoricalOnemax {
    fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    fn fitness(&self, genotype: &Genotype) -> F {
        categorical_onemax_fitness(genotype.genes())
    }
}
