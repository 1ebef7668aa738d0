use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::trajectory::{read_trajectory, TrajectoryRecord};
use super::HarnessError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub checkpoint: u64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub runs: usize,
}

/// Elitist fitness of one run after `n` real evaluations: the last row with
/// `real_evals <= n`, or the first row when the run had not reached `n`.
fn value_at(run: &[TrajectoryRecord], n: u64) -> f64 {
    run.iter()
        .take_while(|r| r.real_evals <= n)
        .last()
        .unwrap_or(&run[0])
        .elitist_fitness
}

/// Mean, min and max elitist fitness over `runs` at every checkpoint.
pub fn aggregate_trajectories(
    runs: &[Vec<TrajectoryRecord>],
    checkpoints: &[u64],
) -> Result<Vec<AggregateRow>, HarnessError> {
    let runs: Vec<Vec<TrajectoryRecord>> = runs
        .iter()
        .filter(|r| !r.is_empty())
        .map(|r| {
            let mut r = r.clone();
            r.sort_by_key(|x| x.real_evals);
            r
        })
        .collect();
    if runs.is_empty() {
        return Err(HarnessError::EmptyInput);
    }
    Ok(checkpoints
        .iter()
        .map(|&n| {
            let mut values: Vec<f64> = runs.iter().map(|r| value_at(r, n)).collect();
            values.sort_by(f64::total_cmp);
            AggregateRow {
                checkpoint: n,
                mean: values.iter().sum::<f64>() / values.len() as f64,
                min: values[0],
                max: values[values.len() - 1],
                runs: values.len(),
            }
        })
        .collect())
}

/// Reads trajectory files and aggregates every run (distinct `run_id` per
/// file) they contain.
pub fn aggregate_files(paths: &[PathBuf], checkpoints: &[u64]) -> Result<Vec<AggregateRow>, HarnessError> {
    let mut runs = Vec::new();
    for path in paths {
        let mut by_run: BTreeMap<usize, Vec<TrajectoryRecord>> = BTreeMap::new();
        for row in read_trajectory(path)? {
            by_run.entry(row.run_id).or_default().push(row);
        }
        runs.extend(by_run.into_values());
    }
    aggregate_trajectories(&runs, checkpoints)
}

pub fn write_aggregate(path: &Path, rows: &[AggregateRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::format(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| HarnessError::format(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(id: usize, points: &[(u64, f64)]) -> Vec<TrajectoryRecord> {
        points
            .iter()
            .map(|&(real_evals, elitist_fitness)| TrajectoryRecord {
                run_id: id,
                seed: id as u64,
                real_evals,
                elapsed_ms: 0,
                elitist_fitness,
                elitist_genotype: "0".into(),
            })
            .collect()
    }

    #[test]
    fn carries_values_forward() {
        let rows = aggregate_trajectories(&[run(0, &[(1, 0.5), (10, 0.7)])], &[5, 10, 20]).unwrap();
        assert_eq!(rows[0].mean, 0.5);
        assert_eq!(rows[1].mean, 0.7);
        assert_eq!(rows[2].mean, 0.7);
    }

    #[test]
    fn early_checkpoint_uses_first_value() {
        let rows = aggregate_trajectories(&[run(0, &[(3, 0.4), (8, 0.6)])], &[1]).unwrap();
        assert_eq!(rows[0].mean, 0.4);
    }

    #[test]
    fn averages_runs() {
        let runs = [run(0, &[(1, 0.1), (4000, 0.8)]), run(1, &[(1, 0.2), (4500, 0.9)])];
        let rows = aggregate_trajectories(&runs, &[5000]).unwrap();
        assert!((rows[0].mean - 0.85).abs() < 1e-12);
        assert_eq!((rows[0].min, rows[0].max, rows[0].runs), (0.8, 0.9, 2));
    }

    #[test]
    fn empty_input() {
        assert!(matches!(
            aggregate_trajectories(&[], &[1]),
            Err(HarnessError::EmptyInput)
        ));
        assert!(matches!(
            aggregate_trajectories(&[vec![]], &[1]),
            Err(HarnessError::EmptyInput)
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn order_of_runs_does_not_matter(
                raw in prop::collection::vec(prop::collection::vec((1u64..100, 0.0f64..1.0), 1..6), 1..6),
                checkpoint in 0u64..120,
            ) {
                let runs: Vec<Vec<TrajectoryRecord>> = raw.iter().enumerate().map(|(i, r)| run(i, r)).collect();
                let mut reversed = runs.clone();
                reversed.reverse();
                prop_assert_eq!(
                    aggregate_trajectories(&runs, &[checkpoint]).unwrap(),
                    aggregate_trajectories(&reversed, &[checkpoint]).unwrap()
                );
            }
        }
    }
}
