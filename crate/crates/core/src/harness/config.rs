use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genotype::ProblemSpec;
use crate::pyramid::{RunSettings, SearchMode, DEFAULT_ETA, DEFAULT_STALL_LIMIT};
use crate::surrogate::RegressorKind;

use super::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "rs")]
    RandomSearch,
    #[serde(rename = "ls")]
    LocalSearch,
    #[serde(rename = "p3")]
    P3,
    #[serde(rename = "sa-p3", alias = "sa_p3")]
    SaP3,
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "rs" => Ok(Algorithm::RandomSearch),
            "ls" => Ok(Algorithm::LocalSearch),
            "p3" => Ok(Algorithm::P3),
            "sa-p3" | "sa_p3" => Ok(Algorithm::SaP3),
            other => Err(format!(
                "unknown algorithm {other:?} (expected rs, ls, p3 or sa-p3)"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    #[serde(alias = "ensemble")]
    Partition,
    Trap,
    Onemax,
}

impl FromStr for ProblemKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "partition" | "ensemble" => Ok(ProblemKind::Partition),
            "trap" => Ok(ProblemKind::Trap),
            "onemax" => Ok(ProblemKind::Onemax),
            other => Err(format!(
                "unknown problem {other:?} (expected partition, trap or onemax)"
            )),
        }
    }
}

/// Fully resolved experiment configuration, echoed into the run manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub algo: Algorithm,
    pub problem: ProblemKind,
    pub dataset: Option<PathBuf>,
    pub num_vars: usize,
    pub alphabet: usize,
    pub trap_k: usize,
    pub budget: u64,
    pub time_limit_s: Option<f64>,
    pub eta: f64,
    pub surrogate: RegressorKind,
    pub runs: usize,
    pub seed: u64,
    pub split_seed: u64,
    pub out: PathBuf,
    pub workers: usize,
    /// Write wall-clock milliseconds into trajectories. Off by default so that
    /// repeated runs produce identical files.
    pub record_time: bool,
    pub stall_limit: u64,
}

impl ExperimentConfig {
    pub fn spec(&self) -> Result<ProblemSpec> {
        match self.problem {
            ProblemKind::Partition => ProblemSpec::partition(self.num_vars, self.alphabet),
            ProblemKind::Trap => ProblemSpec::trap(self.num_vars, self.trap_k),
            ProblemKind::Onemax => ProblemSpec::onemax(self.num_vars, self.alphabet),
        }
    }

    pub fn run_seed(&self, run_id: usize) -> u64 {
        self.seed.wrapping_add(run_id as u64)
    }

    pub fn settings(&self, run_id: usize) -> RunSettings {
        RunSettings {
            budget: self.budget,
            seed: self.run_seed(run_id),
            time_limit: self.time_limit_s.map(Duration::from_secs_f64),
            stall_limit: self.stall_limit,
        }
    }

    pub fn search_mode(&self) -> SearchMode {
        match self.algo {
            Algorithm::SaP3 => SearchMode::Surrogate {
                kind: self.surrogate,
                eta: self.eta,
            },
            _ => SearchMode::Plain,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec()?;
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::Config(format!("eta must lie in (0, 1), got {}", self.eta)));
        }
        if let Some(t) = self.time_limit_s {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("time limit must be positive, got {t}")));
            }
        }
        if self.algo == Algorithm::SaP3 && self.budget < self.num_vars as u64 {
            return Err(Error::Config(format!(
                "sa-p3 needs a budget of at least num_vars = {}, got {}",
                self.num_vars, self.budget
            )));
        }
        if self.problem == ProblemKind::Partition && self.dataset.is_none() {
            return Err(Error::Config("the partition problem needs a dataset".into()));
        }
        Ok(())
    }
}

/// Partial configuration as read from a TOML file or the command line.
/// Later sources override earlier ones key by key.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub algo: Option<Algorithm>,
    pub problem: Option<ProblemKind>,
    pub dataset: Option<PathBuf>,
    pub num_vars: Option<usize>,
    pub alphabet: Option<usize>,
    pub trap_k: Option<usize>,
    pub budget: Option<u64>,
    pub time_limit_s: Option<f64>,
    pub eta: Option<f64>,
    pub surrogate: Option<RegressorKind>,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub split_seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub record_time: Option<bool>,
    pub stall_limit: Option<u64>,
}

impl ConfigOverrides {
    pub fn from_toml_str(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Ok(Self::from_toml_str(&text).map_err(|e| HarnessError::format(path, e))?)
    }

    pub fn merge(self, over: Self) -> Self {
        Self {
            algo: over.algo.or(self.algo),
            problem: over.problem.or(self.problem),
            dataset: over.dataset.or(self.dataset),
            num_vars: over.num_vars.or(self.num_vars),
            alphabet: over.alphabet.or(self.alphabet),
            trap_k: over.trap_k.or(self.trap_k),
            budget: over.budget.or(self.budget),
            time_limit_s: over.time_limit_s.or(self.time_limit_s),
            eta: over.eta.or(self.eta),
            surrogate: over.surrogate.or(self.surrogate),
            runs: over.runs.or(self.runs),
            seed: over.seed.or(self.seed),
            split_seed: over.split_seed.or(self.split_seed),
            out: over.out.or(self.out),
            workers: over.workers.or(self.workers),
            record_time: over.record_time.or(self.record_time),
            stall_limit: over.stall_limit.or(self.stall_limit),
        }
    }

    /// Fills defaults and validates.
    pub fn resolve(self) -> Result<ExperimentConfig> {
        let algo = self
            .algo
            .ok_or_else(|| Error::Config("no algorithm given".into()))?;
        let problem = self
            .problem
            .ok_or_else(|| Error::Config("no problem given".into()))?;
        let seed = self.seed.unwrap_or(0);
        let config = ExperimentConfig {
            algo,
            problem,
            dataset: self.dataset,
            num_vars: self
                .num_vars
                .ok_or_else(|| Error::Config("num_vars is required".into()))?,
            alphabet: self.alphabet.unwrap_or(match problem {
                ProblemKind::Trap => 2,
                _ => 5,
            }),
            trap_k: self.trap_k.unwrap_or(5),
            budget: self.budget.unwrap_or(5000),
            time_limit_s: self.time_limit_s,
            eta: self.eta.unwrap_or(DEFAULT_ETA),
            surrogate: self.surrogate.unwrap_or(RegressorKind::Svr),
            runs: self.runs.unwrap_or(10),
            seed,
            split_seed: self.split_seed.unwrap_or(seed),
            out: self.out.unwrap_or_else(|| PathBuf::from("results")),
            workers: self.workers.unwrap_or(1).max(1),
            record_time: self.record_time.unwrap_or(false),
            stall_limit: self.stall_limit.unwrap_or(DEFAULT_STALL_LIMIT),
        };
        config.validate()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ConfigOverrides {
        ConfigOverrides {
            algo: Some(Algorithm::P3),
            problem: Some(ProblemKind::Trap),
            num_vars: Some(10),
            ..ConfigOverrides::default()
        }
    }

    #[test]
    fn defaults() {
        let c = base().resolve().unwrap();
        assert_eq!(c.budget, 5000);
        assert_eq!(c.eta, 0.999);
        assert_eq!(c.surrogate, RegressorKind::Svr);
        assert_eq!(c.alphabet, 2);
        assert_eq!(c.trap_k, 5);
        assert!(!c.record_time);
    }

    #[test]
    fn toml_with_flag_override() {
        let file = ConfigOverrides::from_toml_str(
            "algo = \"sa-p3\"\nproblem = \"onemax\"\nnum_vars = 20\nalphabet = 3\nbudget = 300\nsurrogate = \"random_forest\"\n",
        )
        .unwrap();
        let flags = ConfigOverrides {
            budget: Some(400),
            ..ConfigOverrides::default()
        };
        let c = file.merge(flags).resolve().unwrap();
        assert_eq!(c.algo, Algorithm::SaP3);
        assert_eq!(c.budget, 400);
        assert_eq!(c.surrogate, RegressorKind::RandomForest);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ConfigOverrides::from_toml_str("algo = \"p3\"\nbogus = 1\n").is_err());
    }

    #[test]
    fn surrogate_budget_must_cover_initialization() {
        let c = ConfigOverrides {
            algo: Some(Algorithm::SaP3),
            budget: Some(9),
            ..base()
        };
        assert!(matches!(c.resolve(), Err(Error::Config(_))));
    }

    #[test]
    fn partition_needs_dataset() {
        let c = ConfigOverrides {
            problem: Some(ProblemKind::Partition),
            ..base()
        };
        assert!(matches!(c.resolve(), Err(Error::Config(_))));
    }

    #[test]
    fn algorithm_names() {
        assert_eq!("sa-p3".parse::<Algorithm>().unwrap(), Algorithm::SaP3);
        assert_eq!("RS".parse::<Algorithm>().unwrap(), Algorithm::RandomSearch);
        assert!("ga".parse::<Algorithm>().is_err());
    }
}
