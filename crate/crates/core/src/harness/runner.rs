use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{run_baseline, Baseline};
use crate::error::{Error, Result};
use crate::genotype::{FitnessFunction, Genotype, Termination};
use crate::problems::{
    load_dataset, partition_fitness, CategoricalOnemax, LogisticRegression, PartitionProblem, SplitSpec, Trap,
};
use crate::pyramid::{run, RunOutcome};
use crate::surrogate::RegressorConfig;

use super::config::{Algorithm, ExperimentConfig, ProblemKind};
use super::trajectory::{read_trajectory, trajectory_file_name, write_trajectory, TrajectoryRecord};
use super::HarnessError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: usize,
    pub seed: u64,
    pub file: String,
    pub termination: Option<Termination>,
    pub real_evals: u64,
    pub best_fitness: Option<f64>,
    pub iterations: u64,
    /// Surrogate hyperparameters picked by the grid search.
    pub tuned: Option<RegressorConfig>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub split: Option<SplitSpec>,
    pub dataset_rows: Option<usize>,
    /// Validation accuracy of one learner on the whole training split.
    pub baseline_accuracy: Option<f64>,
    pub runs: Vec<RunSummary>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Ok(serde_json::from_str(&text).map_err(|e| HarnessError::format(path, e))?)
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    pub trajectories: Vec<Vec<TrajectoryRecord>>,
}

/// An objective ready to be shared by concurrent runs.
pub struct BuiltProblem {
    pub fitness: Box<dyn FitnessFunction<f64> + Send + Sync>,
    pub split: Option<SplitSpec>,
    pub dataset_rows: Option<usize>,
    pub baseline_accuracy: Option<f64>,
}

pub fn build_problem(config: &ExperimentConfig) -> Result<BuiltProblem> {
    let spec = config.spec()?;
    Ok(match config.problem {
        ProblemKind::Trap => BuiltProblem {
            fitness: Box::new(Trap::try_new(spec)?),
            split: None,
            dataset_rows: None,
            baseline_accuracy: None,
        },
        ProblemKind::Onemax => BuiltProblem {
            fitness: Box::new(CategoricalOnemax::new(spec)),
            split: None,
            dataset_rows: None,
            baseline_accuracy: None,
        },
        ProblemKind::Partition => {
            let path = config
                .dataset
                .as_ref()
                .ok_or_else(|| Error::Config("the partition problem needs a dataset".into()))?;
            let mut data = load_dataset::<f64>(path)?;
            data.scale_to_unit();
            let split = SplitSpec::new(config.num_vars, config.split_seed);
            let (train, validation, _) = split.apply(&data)?;
            let problem =
                PartitionProblem::new(train, validation, config.alphabet, LogisticRegression::default())?;
            BuiltProblem {
                baseline_accuracy: Some(problem.baseline()),
                fitness: Box::new(problem),
                split: Some(split),
                dataset_rows: Some(data.len()),
            }
        }
    })
}

/// Runs repetition `run_id` of `config` on `fitness`.
pub fn run_single(
    config: &ExperimentConfig,
    fitness: &dyn FitnessFunction<f64>,
    run_id: usize,
) -> Result<RunOutcome<f64>> {
    let settings = config.settings(run_id);
    match config.algo {
        Algorithm::RandomSearch => run_baseline(Baseline::RandomSearch, fitness, settings, None),
        Algorithm::LocalSearch => run_baseline(Baseline::LocalSearch, fitness, settings, None),
        Algorithm::P3 | Algorithm::SaP3 => run(fitness, config.search_mode(), settings, None),
    }
}

fn records(outcome: &RunOutcome<f64>, run_id: usize, seed: u64, record_time: bool) -> Vec<TrajectoryRecord> {
    outcome
        .trajectory
        .iter()
        .map(|p| TrajectoryRecord {
            run_id,
            seed,
            real_evals: p.real_evals,
            elapsed_ms: if record_time { p.elapsed_ms } else { 0 },
            elitist_fitness: p.fitness,
            elitist_genotype: p.genotype.key(),
        })
        .collect()
}

/// Executes every run of `config` and writes one trajectory file per run plus
/// a manifest into `config.out`. A failing run is recorded in the manifest
/// without stopping the others.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let problem = build_problem(config)?;
    let out = config.out.clone();
    fs::create_dir_all(&out).map_err(|e| HarnessError::io(&out, e))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start workers: {e}")))?;
    let fitness = problem.fitness.as_ref();
    let outcomes: Vec<Result<RunOutcome<f64>>> = pool.install(|| {
        (0..config.runs)
            .into_par_iter()
            .map(|i| run_single(config, fitness, i))
            .collect()
    });

    let mut summaries = Vec::with_capacity(config.runs);
    let mut trajectories = Vec::with_capacity(config.runs);
    for (run_id, outcome) in outcomes.into_iter().enumerate() {
        let seed = config.run_seed(run_id);
        let file = trajectory_file_name(run_id);
        let (rows, summary) = match outcome {
            Ok(o) => (
                records(&o, run_id, seed, config.record_time),
                RunSummary {
                    run_id,
                    seed,
                    file: file.clone(),
                    termination: Some(o.termination),
                    real_evals: o.real_evals,
                    best_fitness: o.best_fitness(),
                    iterations: o.iterations,
                    tuned: o.tuning.map(|t| t.best),
                    error: None,
                },
            ),
            Err(e) => (
                Vec::new(),
                RunSummary {
                    run_id,
                    seed,
                    file: file.clone(),
                    termination: None,
                    real_evals: 0,
                    best_fitness: None,
                    iterations: 0,
                    tuned: None,
                    error: Some(e.to_string()),
                },
            ),
        };
        write_trajectory(&out.join(&file), &rows)?;
        trajectories.push(rows);
        summaries.push(summary);
    }
    let manifest = Manifest {
        config: config.clone(),
        split: problem.split,
        dataset_rows: problem.dataset_rows,
        baseline_accuracy: problem.baseline_accuracy,
        runs: summaries,
    };
    let path = out.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| HarnessError::format(&path, e))?;
    fs::write(&path, text + "\n").map_err(|e| HarnessError::io(&path, e))?;
    Ok(ExperimentReport {
        out_dir: out,
        manifest,
        trajectories,
    })
}

/// Test-split accuracy of the ensemble defined by the final elitist of a
/// trajectory file. The run manifest must sit next to the file. `split`
/// defaults to the manifest's split; a different one is rejected.
pub fn evaluate_on_test(trajectory: &Path, dataset: &Path, split: Option<&SplitSpec>) -> Result<f64> {
    let dir = trajectory.parent().unwrap_or(Path::new("."));
    let manifest = Manifest::load(&dir.join(MANIFEST_FILE))?;
    if manifest.config.problem != ProblemKind::Partition {
        return Err(Error::Config(
            "test evaluation needs a partition-problem run".into(),
        ));
    }
    let expected = manifest
        .split
        .ok_or_else(|| HarnessError::format(dir.join(MANIFEST_FILE), "manifest lacks the split"))?;
    if let Some(s) = split {
        if *s != expected {
            return Err(
                HarnessError::SplitMismatch(format!("requested {s:?}, manifest has {expected:?}")).into(),
            );
        }
    }
    let mut data = load_dataset::<f64>(dataset)?;
    if manifest.dataset_rows.is_some_and(|n| n != data.len()) {
        return Err(HarnessError::SplitMismatch(format!(
            "dataset has {} rows, the run used {}",
            data.len(),
            manifest.dataset_rows.unwrap_or(0)
        ))
        .into());
    }
    data.scale_to_unit();
    let (train, _, test) = expected.apply(&data)?;
    let rows = read_trajectory(trajectory)?;
    let last = rows
        .last()
        .ok_or_else(|| HarnessError::format(trajectory, "trajectory has no rows"))?;
    let genotype: Genotype = last
        .elitist_genotype
        .parse()
        .map_err(|e| HarnessError::format(trajectory, e))?;
    if genotype.len() != train.len() {
        return Err(HarnessError::SplitMismatch(format!(
            "elitist has {} genes, the training split {} samples",
            genotype.len(),
            train.len()
        ))
        .into());
    }
    Ok(partition_fitness(
        &genotype,
        &train,
        &test,
        &LogisticRegression::default(),
    )?)
}
