//! Pairwise dependency estimation (normalized mutual information) and the
//! filtered linkage tree FOS built from it.

use rand::Rng;

use crate::error::{Error, Result};
use crate::genotype::{Gene, Genotype};
use crate::scalar::Scalar;

/// Merge similarity at or above `1 - FILTER_TOLERANCE` counts as maximal.
pub const FILTER_TOLERANCE: f64 = 1e-6;

/// Symmetric matrix of pairwise normalized mutual information.
#[derive(Clone, Debug, PartialEq)]
pub struct NmiMatrix<F> {
    size: usize,
    values: Vec<F>,
}

impl<F: Scalar> NmiMatrix<F> {
    /// Builds a matrix from row-major values. Panics if `values` is not square.
    pub fn from_rows(size: usize, values: Vec<F>) -> Self {
        assert_eq!(values.len(), size * size, "matrix must be {size}x{size}");
        Self { size, values }
    }

    /// Matrix with ones on the diagonal and `value` everywhere else.
    pub fn uniform(size: usize, value: F) -> Self {
        let mut values = vec![value; size * size];
        for i in 0..size {
            values[i * size + i] = F::one();
        }
        Self { size, values }
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn get(&self, i: usize, j: usize) -> F {
        self.values[i * self.size + j]
    }

    pub fn set_symmetric(&mut self, i: usize, j: usize, v: F) {
        self.values[i * self.size + j] = v;
        self.values[j * self.size + i] = v;
    }
}

/// Marginal and pairwise joint value counts over a population. Supports
/// incremental insertion so that a growing population never has to be
/// rescanned.
#[derive(Clone, Debug)]
pub struct PairCounts {
    num_vars: usize,
    alphabet: usize,
    population: usize,
    marginal: Vec<u32>,
    joint: Vec<u32>,
}

impl PairCounts {
    pub fn new(num_vars: usize, alphabet: usize) -> Self {
        let pairs = num_vars * num_vars.saturating_sub(1) / 2;
        Self {
            num_vars,
            alphabet,
            population: 0,
            marginal: vec![0; num_vars * alphabet],
            joint: vec![0; pairs * alphabet * alphabet],
        }
    }

    /// Number of counters this table would allocate.
    pub fn footprint(num_vars: usize, alphabet: usize) -> usize {
        num_vars * num_vars.saturating_sub(1) / 2 * alphabet * alphabet + num_vars * alphabet
    }

    pub fn population(&self) -> usize {
        self.population
    }

    fn pair_offset(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j);
        let l = self.num_vars;
        (i * l - i * (i + 1) / 2 + (j - i - 1)) * self.alphabet * self.alphabet
    }

    pub fn add(&mut self, genotype: &Genotype) {
        let genes = genotype.genes();
        debug_assert_eq!(genes.len(), self.num_vars);
        let a = self.alphabet;
        for (i, &gi) in genes.iter().enumerate() {
            self.marginal[i * a + gi as usize] += 1;
            let row = self.pair_offset_row(i);
            for (k, &gj) in genes[i + 1..].iter().enumerate() {
                self.joint[row + k * a * a + gi as usize * a + gj as usize] += 1;
            }
        }
        self.population += 1;
    }

    fn pair_offset_row(&self, i: usize) -> usize {
        if i + 1 >= self.num_vars {
            return 0;
        }
        self.pair_offset(i, i + 1)
    }

    pub fn from_population(population: &[&Genotype], alphabet: usize) -> Self {
        let mut counts = Self::new(population[0].len(), alphabet);
        for g in population {
            counts.add(g);
        }
        counts
    }

    pub fn nmi_matrix<F: Scalar>(&self) -> NmiMatrix<F> {
        let l = self.num_vars;
        let a = self.alphabet;
        let table = CountLogTable::<F>::new(self.population);
        let entropies: Vec<F> = (0..l)
            .map(|i| table.entropy(&self.marginal[i * a..(i + 1) * a]))
            .collect();
        let mut nmi = NmiMatrix::uniform(l, F::zero());
        for i in 0..l {
            for j in i + 1..l {
                let off = self.pair_offset(i, j);
                let joint = table.entropy(&self.joint[off..off + a * a]);
                nmi.set_symmetric(i, j, normalized_mi(entropies[i], entropies[j], joint));
            }
        }
        nmi
    }
}

/// `c ln c` lookup for counts up to the population size.
struct CountLogTable<F> {
    n: usize,
    c_ln_c: Vec<F>,
}

impl<F: Scalar> CountLogTable<F> {
    fn new(n: usize) -> Self {
        let c_ln_c = (0..=n)
            .map(|c| {
                if c == 0 {
                    F::zero()
                } else {
                    let c = F::of_usize(c);
                    c * c.ln()
                }
            })
            .collect();
        Self { n, c_ln_c }
    }

    /// Entropy (nats) of the empirical distribution given by `counts`.
    fn entropy(&self, counts: &[u32]) -> F {
        if self.n == 0 || counts.iter().any(|&c| c as usize == self.n) {
            return F::zero();
        }
        let n = F::of_usize(self.n);
        let sum: F = counts.iter().map(|&c| self.c_ln_c[c as usize]).sum();
        let h = n.ln() - sum / n;
        h.max(F::zero())
    }
}

fn normalized_mi<F: Scalar>(h_x: F, h_y: F, h_xy: F) -> F {
    if h_xy <= F::zero() {
        return F::zero();
    }
    let mi = h_x + h_y - h_xy;
    (mi / h_xy).max(F::zero()).min(F::one())
}

/// Pairwise NMI `I(X_i;X_j) / H(X_i,X_j)` from the empirical frequencies of
/// `population`. Entries for pairs of constant columns are 0; the diagonal is 1.
pub fn estimate_nmi_matrix<F: Scalar>(population: &[&Genotype]) -> Result<NmiMatrix<F>> {
    let first = population.first().ok_or(Error::EmptyPopulation)?;
    let num_vars = first.len();
    if population.iter().any(|g| g.len() != num_vars) {
        return Err(Error::InvalidGenotype(
            "population genotypes differ in length".into(),
        ));
    }
    let alphabet = population
        .iter()
        .flat_map(|g| g.genes().iter().copied())
        .max()
        .map_or(1, |m| m as usize + 1);
    if PairCounts::footprint(num_vars, alphabet) <= num_vars * population.len() * 4 {
        return Ok(PairCounts::from_population(population, alphabet).nmi_matrix());
    }
    Ok(nmi_by_columns(population, num_vars, alphabet))
}

/// Column-wise contingency counting; cheaper than [`PairCounts`] when the
/// population is small relative to `alphabet^2`.
fn nmi_by_columns<F: Scalar>(population: &[&Genotype], num_vars: usize, alphabet: usize) -> NmiMatrix<F> {
    let n = population.len();
    let columns: Vec<Vec<Gene>> = (0..num_vars)
        .map(|i| population.iter().map(|g| g.genes()[i]).collect())
        .collect();
    let table = CountLogTable::<F>::new(n);
    let mut counts = vec![0u32; alphabet * alphabet];
    let entropies: Vec<F> = columns
        .iter()
        .map(|col| {
            let mut c = vec![0u32; alphabet];
            for &v in col {
                c[v as usize] += 1;
            }
            table.entropy(&c)
        })
        .collect();
    let mut nmi = NmiMatrix::uniform(num_vars, F::zero());
    for i in 0..num_vars {
        for j in i + 1..num_vars {
            counts.iter_mut().for_each(|c| *c = 0);
            for (&x, &y) in columns[i].iter().zip(&columns[j]) {
                counts[x as usize * alphabet + y as usize] += 1;
            }
            let joint = table.entropy(&counts);
            nmi.set_symmetric(i, j, normalized_mi(entropies[i], entropies[j], joint));
        }
    }
    nmi
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinkageNode<F> {
    /// Sorted variable indices.
    pub members: Vec<usize>,
    /// Indices of the two merged nodes; `None` for leaves.
    pub children: Option<(usize, usize)>,
    /// Average inter-cluster similarity at which the children were merged.
    pub merge_similarity: Option<F>,
}

/// Unfiltered linkage tree: `num_vars` leaves followed by the merge nodes in
/// merge order; the root is the last node.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkageTree<F> {
    nodes: Vec<LinkageNode<F>>,
}

impl<F: Scalar> LinkageTree<F> {
    pub fn nodes(&self) -> &[LinkageNode<F>] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops the root, and both children of every merge performed at maximal
    /// similarity.
    pub fn filtered(&self) -> Fos {
        if self.nodes.is_empty() {
            return Fos::default();
        }
        let mut keep = vec![true; self.nodes.len()];
        let cutoff = F::one() - F::of(FILTER_TOLERANCE);
        for node in &self.nodes {
            if let (Some((a, b)), Some(sim)) = (node.children, node.merge_similarity) {
                if sim >= cutoff {
                    keep[a] = false;
                    keep[b] = false;
                }
            }
        }
        let root = self.nodes.len() - 1;
        keep[root] = false;
        Fos::new(
            self.nodes
                .iter()
                .zip(keep)
                .filter(|(_, k)| *k)
                .map(|(n, _)| n.members.clone())
                .collect(),
        )
    }
}

/// UPGMA agglomerative clustering on `nmi`, merging the most similar pair of
/// clusters first. Exact ties are broken uniformly at random.
pub fn build_linkage_tree<F: Scalar, R: Rng + ?Sized>(nmi: &NmiMatrix<F>, rng: &mut R) -> LinkageTree<F> {
    let l = nmi.len();
    let mut nodes: Vec<LinkageNode<F>> = (0..l)
        .map(|i| LinkageNode {
            members: vec![i],
            children: None,
            merge_similarity: None,
        })
        .collect();
    if l == 0 {
        return LinkageTree { nodes };
    }
    // Cluster similarities live in slots; a merged cluster reuses the slot of
    // its first member and the other slot is retired.
    let mut sim: Vec<F> = nmi.values.clone();
    let mut slot_node: Vec<usize> = (0..l).collect();
    let mut slot_size: Vec<usize> = vec![1; l];
    let mut active: Vec<usize> = (0..l).collect();

    while active.len() > 1 {
        let mut best = F::neg_infinity();
        let mut best_pair = (0, 0);
        let mut ties = 0u32;
        for (x, &a) in active.iter().enumerate() {
            for &b in &active[x + 1..] {
                let s = sim[a * l + b];
                if s > best {
                    best = s;
                    best_pair = (a, b);
                    ties = 1;
                } else if s == best {
                    ties += 1;
                    if rng.random_range(0..ties) == 0 {
                        best_pair = (a, b);
                    }
                }
            }
        }
        let (a, b) = best_pair;
        let (na, nb) = (slot_node[a], slot_node[b]);
        let mut members = nodes[na].members.clone();
        members.extend_from_slice(&nodes[nb].members);
        members.sort_unstable();
        nodes.push(LinkageNode {
            members,
            children: Some((na, nb)),
            merge_similarity: Some(best),
        });

        let (sa, sb) = (F::of_usize(slot_size[a]), F::of_usize(slot_size[b]));
        for &k in &active {
            if k == a || k == b {
                continue;
            }
            let merged = (sa * sim[a * l + k] + sb * sim[b * l + k]) / (sa + sb);
            sim[a * l + k] = merged;
            sim[k * l + a] = merged;
        }
        slot_node[a] = nodes.len() - 1;
        slot_size[a] += slot_size[b];
        active.retain(|&k| k != b);
    }
    LinkageTree { nodes }
}

pub fn build_filtered_linkage_tree<F: Scalar, R: Rng + ?Sized>(nmi: &NmiMatrix<F>, rng: &mut R) -> Fos {
    build_linkage_tree(nmi, rng).filtered()
}

/// Family of subsets: the variable groups exposed to variation.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Fos {
    subsets: Vec<Vec<usize>>,
}

impl Fos {
    pub fn new(subsets: Vec<Vec<usize>>) -> Self {
        Self { subsets }
    }

    /// One singleton per variable.
    pub fn univariate(num_vars: usize) -> Self {
        Self::new((0..num_vars).map(|i| vec![i]).collect())
    }

    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    pub fn contains(&self, subset: &[usize]) -> bool {
        let mut wanted = subset.to_vec();
        wanted.sort_unstable();
        self.subsets.iter().any(|s| {
            let mut s = s.clone();
            s.sort_unstable();
            s == wanted
        })
    }
}
