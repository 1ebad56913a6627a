use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn softplex(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_softplex")).args(args).current_dir(dir).env_remove("SOFTPLEX_THREADS").output().unwrap()
}

const EXPERIMENT: &str = r#"{
  "model": "rips", "process": "binomial", "n": 2000, "d": 1,
  "r": {"exponent": 1.1}, "k_max": 2, "replications": 12, "master_seed": 5,
  "statistic": {"fk": 1}
}"#;

#[test]
fn regime_prints_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = softplex(&["regime", "--n", "1e6", "--d", "1", "--a", "1.1", "--k", "1"], dir.path());
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((report["sparsity"].as_f64().unwrap() - 10f64.powf(-0.6)).abs() < 1e-12);
    assert!((report["growth"].as_f64().unwrap() - 10f64.powf(5.4)).abs() < 1e-6);
    assert_eq!(report["pass"], true);
    assert_eq!(report["config"]["n"], 1e6);
}

#[test]
fn missing_config_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = softplex(&["experiment", "run", "--config", "missing.json", "--out", "r.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("r.csv").exists());
}

#[test]
fn malformed_json_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), "{\n  \"model\": rips\n}").unwrap();
    let out = softplex(&["experiment", "run", "--config", "bad.json", "--out", "r.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2 column"), "{err}");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = EXPERIMENT.replace("\"d\": 1,", "\"d\": 1, \"dimension\": 1,");
    fs::write(dir.path().join("exp.json"), text).unwrap();
    let out = softplex(&["experiment", "run", "--config", "exp.json", "--out", "r.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sample_writes_points() {
    let dir = tempfile::tempdir().unwrap();
    let out = softplex(&["sample", "--n", "10", "--density", "uniform", "--d", "2", "--seed", "1", "--out", "pts.csv"], dir.path());
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("pts.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x0,x1");
    assert_eq!(lines.len(), 11);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 2));
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("pts.csv.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 1);
}

#[test]
fn memory_guard_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("exp.json"), EXPERIMENT).unwrap();
    let out = softplex(&["experiment", "run", "--config", "exp.json", "--n", "1e6", "--r", "0.5", "--out", "r.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_report_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("exp.json"), EXPERIMENT).unwrap();
    let run = softplex(&["experiment", "run", "--config", "exp.json", "--seed", "9", "--kmax", "1", "--out", "r.csv"], dir.path());
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let csv = fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert!(csv.starts_with("rep,f0,f1,chi,n_points,seconds\n"));
    assert_eq!(csv.lines().count(), 13);
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("r.csv.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["master_seed"], 9);
    assert_eq!(meta["config"]["k_max"], 1);

    let report = softplex(
        &["experiment", "report", "--in", "r.csv", "--config", "exp.json", "--kmax", "1", "--out", "rep/report.json", "--constant-samples", "1e4"],
        dir.path(),
    );
    assert!(report.status.success(), "{}", String::from_utf8_lossy(&report.stderr));
    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("rep/report.json")).unwrap()).unwrap();
    assert_eq!(rep["replications"], 12);
    assert!(rep["predicted_mean"].as_f64().unwrap() > 0.0);
    let qq = fs::read_to_string(dir.path().join("rep/qq.csv")).unwrap();
    assert_eq!(qq.lines().count(), 13);
}

#[test]
fn constants_writes_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let out = softplex(
        &["constants", "--kind", "mu", "--k", "1", "--d", "2", "--density", "uniform", "--samples", "1e4", "--seed", "1", "--out", "mu.json"],
        dir.path(),
    );
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("mu.json")).unwrap()).unwrap();
    assert!((v["value"].as_f64().unwrap() - std::f64::consts::FRAC_PI_2).abs() < 0.1);
    assert_eq!(v["samples"], 10_000);
    assert_eq!(v["params"]["kind"], "mu");
}

#[test]
fn build_dumps_faces() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("exp.json"), EXPERIMENT).unwrap();
    let out = softplex(&["build", "--config", "exp.json", "--n", "300", "--out-dir", "dump"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("dump/build.json")).unwrap()).unwrap();
    let f1 = summary["f"][1].as_u64().unwrap();
    let edges = fs::read_to_string(dir.path().join("dump/edges.csv")).unwrap();
    assert_eq!(edges.lines().count() as u64, f1 + 1);
    let faces2 = fs::read_to_string(dir.path().join("dump/faces_2.csv")).unwrap();
    assert!(faces2.starts_with("v0,v1,v2\n"));
}
