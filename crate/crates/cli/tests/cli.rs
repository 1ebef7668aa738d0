use std::path::Path;
use std::process::{Command, Output};

fn sagomea(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sagomea"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = sagomea(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn make_dataset_run_aggregate_and_test_eval() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data.csv");
    ok(&[
        "make-dataset",
        "--samples",
        "1100",
        "--features",
        "3",
        "--classes",
        "3",
        "--seed",
        "4",
        "--out",
        s(&data),
    ]);
    let text = std::fs::read_to_string(&data).unwrap();
    assert_eq!(text.lines().count(), 1101);
    assert!(text.starts_with("x0,x1,x2,label\n"));

    let out = tmp.path().join("runs");
    let stdout = ok(&[
        "run",
        "--algo",
        "p3",
        "--problem",
        "partition",
        "--dataset",
        s(&data),
        "--num-vars",
        "40",
        "--alphabet",
        "3",
        "--budget",
        "60",
        "--runs",
        "2",
        "--seed",
        "9",
        "--out",
        s(&out),
    ]);
    assert!(stdout.contains("single-learner baseline"));
    assert!(out.join("run_000.csv").exists() && out.join("run_001.csv").exists());
    assert!(out.join("manifest.json").exists());

    let agg = ok(&["aggregate", "--in", s(&out), "--checkpoints", "1,30,60"]);
    let lines: Vec<&str> = agg.lines().collect();
    assert_eq!(lines[0], "checkpoint,mean,min,max,runs");
    assert_eq!(lines.len(), 4);
    assert!(lines[1..].iter().all(|l| l.ends_with(",2")));

    let agg_file = tmp.path().join("agg.csv");
    ok(&[
        "aggregate",
        "--in",
        s(&out.join("run_000.csv")),
        "--checkpoints",
        "60",
        "--out",
        s(&agg_file),
    ]);
    assert!(std::fs::read_to_string(&agg_file)
        .unwrap()
        .starts_with("checkpoint,mean,min,max,runs\n"));

    let acc: f64 = ok(&[
        "test-eval",
        "--trajectory",
        s(&out.join("run_001.csv")),
        "--dataset",
        s(&data),
    ])
    .trim()
    .parse()
    .unwrap();
    assert!((0.0..=1.0).contains(&acc));
    let same = ok(&[
        "test-eval",
        "--trajectory",
        s(&out.join("run_001.csv")),
        "--dataset",
        s(&data),
        "--split-seed",
        "9",
    ]);
    assert_eq!(same.trim().parse::<f64>().unwrap(), acc);

    let mismatch = sagomea(&[
        "test-eval",
        "--trajectory",
        s(&out.join("run_001.csv")),
        "--dataset",
        s(&data),
        "--split-seed",
        "10",
    ]);
    assert!(!mismatch.status.success());
    assert!(String::from_utf8_lossy(&mismatch.stderr).contains("split"));
}

#[test]
fn config_file_with_flag_override_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("exp.toml");
    std::fs::write(
        &config,
        "algo = \"sa-p3\"\nproblem = \"trap\"\nnum_vars = 10\nbudget = 500\nruns = 2\nseed = 1\n",
    )
    .unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["run", "--config", s(&config), "--budget", "60", "--out", s(&a)]);
    ok(&[
        "run",
        "--config",
        s(&config),
        "--budget",
        "60",
        "--out",
        s(&b),
        "--workers",
        "2",
    ]);
    for f in ["run_000.csv", "run_001.csv"] {
        let x = std::fs::read(a.join(f)).unwrap();
        assert_eq!(x, std::fs::read(b.join(f)).unwrap());
        let last = String::from_utf8(x).unwrap().lines().last().unwrap().to_string();
        let evals: u64 = last.split(',').nth(2).unwrap().parse().unwrap();
        assert!(evals <= 60);
    }
}

#[test]
fn bad_input_is_reported() {
    let out = sagomea(&["run", "--algo", "p3", "--problem", "trap"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("num_vars"));

    let out = sagomea(&["run", "--algo", "gomea", "--problem", "trap", "--num-vars", "10"]);
    assert!(!out.status.success());

    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("bad.toml");
    std::fs::write(&config, "algo = \"p3\"\nwhatever = 1\n").unwrap();
    let out = sagomea(&[
        "run",
        "--config",
        s(&config),
        "--problem",
        "trap",
        "--num-vars",
        "10",
    ]);
    assert!(!out.status.success());

    let out = sagomea(&["aggregate", "--in", s(tmp.path()), "--checkpoints", "5"]);
    assert!(!out.status.success());
    let out = sagomea(&["aggregate", "--in", s(&config), "--checkpoints", "5,1"]);
    assert!(!out.status.success());
}
