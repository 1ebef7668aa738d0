use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;

/// One row of a trajectory file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub run_id: usize,
    pub seed: u64,
    pub real_evals: u64,
    pub elapsed_ms: u64,
    pub elitist_fitness: f64,
    /// Comma-separated cache key of the elitist.
    pub elitist_genotype: String,
}

pub fn trajectory_file_name(run_id: usize) -> String {
    format!("run_{run_id:03}.csv")
}

pub fn write_trajectory(path: &Path, rows: &[TrajectoryRecord]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::format(path, e))?;
    if rows.is_empty() {
        w.write_record([
            "run_id",
            "seed",
            "real_evals",
            "elapsed_ms",
            "elitist_fitness",
            "elitist_genotype",
        ])
        .map_err(|e| HarnessError::format(path, e))?;
    }
    for row in rows {
        w.serialize(row).map_err(|e| HarnessError::format(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectoryRecord>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| HarnessError::format(path, e))?;
    r.deserialize()
        .collect::<Result<Vec<TrajectoryRecord>, _>>()
        .map_err(|e| HarnessError::format(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_quotes_genotypes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(trajectory_file_name(3));
        assert!(path.ends_with("run_003.csv"));
        let rows = vec![
            TrajectoryRecord {
                run_id: 3,
                seed: 7,
                real_evals: 1,
                elapsed_ms: 0,
                elitist_fitness: 0.5,
                elitist_genotype: "0,1,1".into(),
            },
            TrajectoryRecord {
                run_id: 3,
                seed: 7,
                real_evals: 4,
                elapsed_ms: 0,
                elitist_fitness: 0.75,
                elitist_genotype: "0,1,2".into(),
            },
        ];
        write_trajectory(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("run_id,seed,real_evals,elapsed_ms,elitist_fitness,elitist_genotype\n"));
        assert!(text.contains("\"0,1,1\""));
        assert_eq!(read_trajectory(&path).unwrap(), rows);
    }

    #[test]
    fn empty_file_keeps_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        write_trajectory(&path, &[]).unwrap();
        assert!(read_trajectory(&path).unwrap().is_empty());
    }
}
