use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use sagomea::harness::{
    aggregate_files, evaluate_on_test, run_experiment, write_aggregate, Algorithm, ConfigOverrides,
    ProblemKind,
};
use sagomea::problems::{synthetic_classification, write_dataset_csv, SplitSpec};
use sagomea::RegressorKind;

#[derive(Parser)]
#[command(name = "sagomea", version, about = "Surrogate-assisted P3-GOMEA experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute repeated optimization runs and write trajectory files.
    Run(RunArgs),
    /// Average trajectories at evaluation checkpoints.
    Aggregate(AggregateArgs),
    /// Accuracy on the held-out test split of a run's final elitist.
    TestEval(TestEvalArgs),
    /// Write a seeded synthetic classification dataset as CSV.
    MakeDataset(MakeDatasetArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML file with the same keys as the flags (snake_case); flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    algo: Option<Algorithm>,
    #[arg(long)]
    problem: Option<ProblemKind>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    num_vars: Option<usize>,
    #[arg(long)]
    alphabet: Option<usize>,
    #[arg(long)]
    trap_k: Option<usize>,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    surrogate: Option<RegressorKind>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    split_seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    time_limit_s: Option<f64>,
    /// Store wall-clock milliseconds in trajectories (breaks byte-identical reruns).
    #[arg(long)]
    record_time: bool,
}

impl RunArgs {
    fn overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            algo: self.algo,
            problem: self.problem,
            dataset: self.dataset.clone(),
            num_vars: self.num_vars,
            alphabet: self.alphabet,
            trap_k: self.trap_k,
            budget: self.budget,
            time_limit_s: self.time_limit_s,
            eta: self.eta,
            surrogate: self.surrogate,
            runs: self.runs,
            seed: self.seed,
            split_seed: self.split_seed,
            out: self.out.clone(),
            workers: self.workers,
            record_time: self.record_time.then_some(true),
            stall_limit: None,
        }
    }
}

#[derive(Args)]
struct AggregateArgs {
    /// Trajectory files, or directories whose run_*.csv files are used.
    #[arg(long = "in", num_args = 1.., required = true)]
    inputs: Vec<PathBuf>,
    /// Ascending real-evaluation counts, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    checkpoints: Vec<u64>,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TestEvalArgs {
    #[arg(long)]
    trajectory: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    /// Split seed to check against the manifest.
    #[arg(long)]
    split_seed: Option<u64>,
}

#[derive(Args)]
struct MakeDatasetArgs {
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    #[arg(long, default_value_t = 8)]
    features: usize,
    #[arg(long, default_value_t = 4)]
    classes: usize,
    #[arg(long, default_value_t = 3)]
    clusters: usize,
    #[arg(long, default_value_t = 0.12)]
    spread: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn expand_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .with_context(|| format!("reading {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| {
                    f.file_name()
                        .and_then(|n| n.to_str())
                        .is_some_and(|n| n.starts_with("run_") && n.ends_with(".csv"))
                })
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        bail!("no trajectory files found");
    }
    Ok(files)
}

fn run(args: RunArgs) -> Result<()> {
    let file = match &args.config {
        Some(p) => ConfigOverrides::load(p)?,
        None => ConfigOverrides::default(),
    };
    let config = file.merge(args.overrides()).resolve()?;
    let report = run_experiment(&config)?;
    for r in &report.manifest.runs {
        match (&r.error, r.best_fitness) {
            (Some(e), _) => eprintln!("run {:3} seed {}: failed: {e}", r.run_id, r.seed),
            (None, best) => println!(
                "run {:3} seed {}: best {} after {} evaluations",
                r.run_id,
                r.seed,
                best.map_or_else(|| "-".to_string(), |b| b.to_string()),
                r.real_evals
            ),
        }
    }
    if let Some(b) = report.manifest.baseline_accuracy {
        println!("single-learner baseline: {b}");
    }
    println!("wrote {}", report.out_dir.display());
    Ok(())
}

fn aggregate(args: AggregateArgs) -> Result<()> {
    if args.checkpoints.windows(2).any(|w| w[0] > w[1]) {
        bail!("checkpoints must be ascending");
    }
    let files = expand_inputs(&args.inputs)?;
    let rows = aggregate_files(&files, &args.checkpoints)?;
    match args.out {
        Some(path) => write_aggregate(&path, &rows)?,
        None => {
            println!("checkpoint,mean,min,max,runs");
            for r in rows {
                println!("{},{},{},{},{}", r.checkpoint, r.mean, r.min, r.max, r.runs);
            }
        }
    }
    Ok(())
}

fn test_eval(args: TestEvalArgs) -> Result<()> {
    let split = match args.split_seed {
        Some(seed) => {
            let dir = args.trajectory.parent().unwrap_or(Path::new("."));
            let manifest = sagomea::harness::Manifest::load(&dir.join(sagomea::harness::MANIFEST_FILE))?;
            let base = manifest
                .split
                .unwrap_or(SplitSpec::new(manifest.config.num_vars, seed));
            Some(SplitSpec { seed, ..base })
        }
        None => None,
    };
    let accuracy = evaluate_on_test(&args.trajectory, &args.dataset, split.as_ref())?;
    println!("{accuracy}");
    Ok(())
}

fn make_dataset(args: MakeDatasetArgs) -> Result<()> {
    let data = synthetic_classification(
        args.samples,
        args.features,
        args.classes,
        args.clusters,
        args.spread,
        args.seed,
    );
    let file = File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_dataset_csv(&data, BufWriter::new(file))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Aggregate(a) => aggregate(a),
        Command::TestEval(a) => test_eval(a),
        Command::MakeDataset(a) => make_dataset(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
