use std::path::Path;
use std::process::{Command, Output};

fn gosched(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gosched")).args(args).output().unwrap()
}

fn json(bytes: &[u8]) -> serde_json::Value {
    serde_json::from_slice(bytes).unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

const SHORT: &str = r#"{"horizon": 400, "warmup": 200, "scheduler": "montecarlo"}"#;

#[test]
fn complexity_prints_bounds() {
    let out = gosched(&["complexity", "--n", "20", "--m", "30", "--c", "2", "--s", "100", "--nprime", "2", "--json"]);
    assert!(out.status.success());
    let v = json(&out.stdout);
    assert_eq!(v["proposed"]["lower"], 136930);
    assert_eq!(v["benchmark"]["lower"], 59090323);
    assert_eq!(v["benchmark"]["upper"], 59090342);
    assert_eq!(v["montecarlo"]["upper"], 2175018940u64);
}

#[test]
fn cqpoints_prints_weights_and_points() {
    let out = gosched(&["cqpoints", "--dim", "3", "--order", "2"]);
    assert!(out.status.success());
    let v = json(&out.stdout);
    assert_eq!(v["weights"].as_array().unwrap().len(), 12);
    assert_eq!(v["points"][0].as_array().unwrap().len(), 3);
    let total: f64 = v["weights"].as_array().unwrap().iter().map(|w| w.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(gosched(&["bogus"]).status.code(), Some(2));
    assert_eq!(gosched(&["cqpoints", "--dim", "3", "--order", "2", "--extra"]).status.code(), Some(2));
    assert_eq!(gosched(&["run", "--seeds", "0"]).status.code(), Some(2));
}

#[test]
fn bad_config_exits_one_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"mu": 2.0}"#);
    let out = gosched(&["run", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mu"));

    let out = gosched(&["run", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SHORT);
    let out_dir = dir.path().join("single");
    let out = gosched(&["run", "--config", &cfg, "--seed", "3", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["records.csv", "events.csv", "summary.json"] {
        assert!(out_dir.join(f).is_file(), "{f}");
    }
    let summary = json(&std::fs::read(out_dir.join("summary.json")).unwrap());
    assert_eq!(summary["seed"], 3);
    assert_eq!(json(&out.stdout), summary);
    let records = std::fs::read_to_string(out_dir.join("records.csv")).unwrap();
    assert_eq!(records.lines().count(), 401);
}

#[test]
fn replications_write_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SHORT);
    let out_dir = dir.path().join("many");
    let out = gosched(&["run", "--config", &cfg, "--seed", "5", "--seeds", "2", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("aggregate.json").is_file());
    for seed in [5, 6] {
        assert!(out_dir.join(format!("seed_{seed}")).join("summary.json").is_file());
    }
}
