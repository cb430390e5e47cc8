use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hydrapf_bench::scenario::SUMMARY_HEADER;

const SMALL: &str = r#"
[input]
duration = 1.0
fs = 256.0
f1 = 5.0

[pf]
particles = [20, 40]

[run]
realizations = 2
base_seed = 11

[compare]
frequencies = [1.0, 8.0]
duration = 1.0
"#;

fn hydrapf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hydrapf")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn run_ok(args: &[&str]) {
    let out = hydrapf(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn write_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("scenario.toml");
    fs::write(&path, format!("{SMALL}\n{extra}")).unwrap();
    path.to_str().unwrap().to_string()
}

fn header(path: &Path) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.headers().unwrap().iter().map(str::to_string).collect()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn simulate_writes_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = dir.path().join("sim");
    run_ok(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let h = header(&out.join("simulation.csv"));
    assert_eq!(h[0], "t");
    assert!(h.iter().any(|c| c == "command_error"));
    let rows = csv::Reader::from_path(out.join("simulation.csv")).unwrap().records().count();
    // Both endpoints of the 1 s window at 256 Hz.
    assert_eq!(rows, 257);
    assert_eq!(manifest(&out)["command"], "simulate");
}

#[test]
fn compare_models_lists_both_models_per_frequency() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = dir.path().join("cmp");
    run_ok(&["compare-models", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let mut r = csv::Reader::from_path(out.join("compare_models.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert!(!rows.is_empty());
    for f in ["1", "8"] {
        for model in ["nonlinear-nominal", "linear-nominal"] {
            assert!(rows.iter().any(|row| &row[0] == f && &row[1] == model), "missing {f} Hz {model}");
        }
    }
}

#[test]
fn sweep_counts_and_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[noise]\nlevel = [\"L1\", \"L3\"]\n");
    let out = dir.path().join("sweep");
    run_ok(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap(), "--threads", "2"]);

    let m = manifest(&out);
    let (levels, reps, counts) = (2, 2, 2);
    assert_eq!(m["counts"]["plant_simulations"], levels * reps);
    assert_eq!(m["counts"]["estimator_runs"], levels * reps * (1 + counts));
    assert_eq!(m["counts"]["realizations_failed"], 0);
    assert_eq!(m["base_seed"], 11);
    assert_eq!(m["threads"], 2);

    assert_eq!(header(&out.join("summary.csv")), SUMMARY_HEADER);
    let rows: Vec<csv::StringRecord> =
        csv::Reader::from_path(out.join("summary.csv")).unwrap().records().map(Result::unwrap).collect();
    // KF scores three quantities, each PF run four, over three intervals per level.
    assert_eq!(rows.len(), levels * 3 * (3 + 4 * counts));
    assert!(rows.iter().all(|r| r[8].parse::<usize>().unwrap() == reps));

    for level in ["L1", "L3"] {
        for r in 0..reps {
            let ts = out.join(level).join(format!("timeseries_{r}.csv"));
            let h = header(&ts);
            assert_eq!(h[0], "t");
            assert!(h.len() > 5, "{h:?}");
        }
    }
}

#[test]
fn manifest_reruns_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    run_ok(&["estimate", "--config", &cfg, "--out", first.to_str().unwrap(), "--seed", "99"]);
    let manifest_path = first.join("manifest.json");
    run_ok(&["estimate", "--config", manifest_path.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert_eq!(manifest(&second)["base_seed"], 99);
    for file in ["summary.csv", "timeseries_0.csv", "timeseries_1.csv"] {
        assert_eq!(fs::read(first.join(file)).unwrap(), fs::read(second.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn seed_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    // KF only keeps this quick.
    let path = dir.path().join("kf.toml");
    fs::write(&path, format!("estimators = [\"kf\"]\n{SMALL}")).unwrap();
    let cfg = path.to_str().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_ok(&["estimate", "--config", cfg, "--out", a.to_str().unwrap(), "--seed", "1"]);
    run_ok(&["estimate", "--config", cfg, "--out", b.to_str().unwrap(), "--seed", "2"]);
    assert_ne!(fs::read(a.join("summary.csv")).unwrap(), fs::read(b.join("summary.csv")).unwrap());
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let bad = write_config(dir.path(), "[kf]\nq_over_r = -1.0\n");
    let res = hydrapf(&["estimate", "--config", &bad, "--out", out.to_str().unwrap()]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("q_over_r"));

    let unknown = dir.path().join("unknown.toml");
    fs::write(&unknown, "[run]\nrealisations = 3\n").unwrap();
    let res = hydrapf(&["estimate", "--config", unknown.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("realisations"));
}

#[test]
fn estimate_rejects_several_levels() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[noise]\nlevel = [\"L1\", \"L2\"]\n");
    let res = hydrapf(&["estimate", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("sweep"));
}
