use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn mixbound(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixbound"))
        .args(args)
        .env_remove("MIXBOUND_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("bad JSON ({e}): {}", stdout(out)))
}

#[test]
fn schedule_poly_one_at_twelve() {
    let out = mixbound(&["schedule", "--n", "12", "--profile", "poly:m=1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["results"]["q_seq"][0], 2);
    assert_eq!(v["results"]["divisors"], serde_json::json!([1, 2, 3, 4, 6, 12]));
    assert_eq!(v["command"], "schedule");
}

#[test]
fn rates_slow_regime_csv() {
    let out = mixbound(&["rates", "--profile", "poly:m=0.5", "--r", "4", "--n-min", "1000", "--n-max", "100000"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "n,q_n0,frak_n,effective_n,regime,lower_env,upper_env,strong_rate");
    let rows: Vec<&str> = lines.collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.split(',').nth(4) == Some("slow")));
    assert!(!text.contains('\r'));
}

#[test]
fn unknown_suite_lists_available() {
    let out = mixbound(&["verify", "--suite", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    for suite in ["grid", "norms", "rates", "chaining", "coupling", "all"] {
        assert!(err.contains(suite), "{err}");
    }
}

#[test]
fn lattice_violation_suggests_nearest() {
    let out = mixbound(&["schedule", "--n", "100", "--profile", "iid"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("nearest admissible: 96"), "{}", stderr(&out));
}

#[test]
fn missing_field_is_named() {
    let out = mixbound(&["schedule", "--profile", "iid"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("`n`"), "{}", stderr(&out));
}

#[test]
fn config_merge_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"command": "schedule", "n": 12, "profile": "iid", "seed": 11}"#).unwrap();
    let cfg = cfg.to_str().unwrap();

    let v = json(&mixbound(&["schedule", "--config", cfg]));
    assert_eq!(v["inputs"]["profile"], "iid");
    assert_eq!(v["inputs"]["seed"], 11);
    assert_eq!(v["results"]["q_seq"][0], 1);

    let v = json(&mixbound(&["schedule", "--config", cfg, "--profile", "poly:m=1", "--seed", "3"]));
    assert_eq!(v["inputs"]["profile"], "poly:m=1");
    assert_eq!(v["inputs"]["seed"], 3);
    assert_eq!(v["results"]["q_seq"][0], 2);
}

#[test]
fn config_schema_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"n": 12, "profile": "iid", "block": 3}"#).unwrap();
    let out = mixbound(&["schedule", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("block"), "{}", stderr(&out));

    std::fs::write(&cfg, r#"{"n": "twelve", "profile": "iid"}"#).unwrap();
    let out = mixbound(&["schedule", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    std::fs::write(&cfg, r#"{"command": "rates", "n": 12}"#).unwrap();
    let out = mixbound(&["schedule", "--config", cfg.to_str().unwrap()]);
    assert!(stderr(&out).contains("command"), "{}", stderr(&out));
}

#[test]
fn seed_from_environment() {
    let run = |env: Option<&str>, flag: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_mixbound"));
        cmd.args(["simulate", "--process", "ar1:rho=0.5", "--class", "lipschitz4", "--n", "96", "--reps", "30"]);
        cmd.args(["--format", "json"]);
        if let Some(s) = flag {
            cmd.args(["--seed", s]);
        }
        match env {
            Some(s) => cmd.env("MIXBOUND_SEED", s),
            None => cmd.env_remove("MIXBOUND_SEED"),
        };
        let out = cmd.output().unwrap();
        assert!(out.status.success(), "{}", stderr(&out));
        json(&out)
    };
    assert_eq!(run(None, None)["inputs"]["seed"], 7);
    assert_eq!(run(Some("19"), None)["inputs"]["seed"], 19);
    assert_eq!(run(Some("19"), Some("5"))["inputs"]["seed"], 5);
    assert_eq!(run(Some("19"), None)["results"], run(None, Some("19"))["results"]);
    assert_ne!(run(None, None)["results"], run(None, Some("19"))["results"]);
}

#[test]
fn simulate_is_deterministic_across_workers() {
    let args = ["simulate", "--process", "ar1:rho=0.9", "--class", "lipschitz5", "--n", "1536", "--reps", "40"];
    let one = mixbound(&[&args[..], &["--workers", "1"]].concat());
    let four = mixbound(&[&args[..], &["--workers", "4"]].concat());
    assert!(one.status.success(), "{}", stderr(&one));
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(one.stderr, four.stderr);
    let text = stdout(&one);
    assert!(text.starts_with("rep,sup_value\n"));
    assert_eq!(text.lines().count(), 41);
    let summary: Value = serde_json::from_slice(&one.stderr).unwrap();
    assert!(summary["results"]["expected_sup"]["std_error"].as_f64().unwrap() > 0.0);
}

#[test]
fn output_file_and_gamma_class_file() {
    let dir = tempfile::tempdir().unwrap();
    let class = dir.path().join("class.json");
    std::fs::write(&class, r#"{"members": [[0, 0], [1, 0], [0, 1]], "weights": [0.5, 0.5]}"#).unwrap();
    let report = dir.path().join("gamma.json");
    let out = mixbound(&[
        "gamma",
        "--class-file",
        class.to_str().unwrap(),
        "--norms",
        "constant:l2",
        "--output",
        report.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(Path::new(&report)).unwrap()).unwrap();
    assert_eq!(v["results"]["method"], "exact");
    assert!(v["results"]["gamma"].as_f64().unwrap() > 0.0);
    assert_eq!(v["results"]["witness_partitions"][0], serde_json::json!([[0, 1, 2]]));
}

#[test]
fn norms_from_sample_csv() {
    let dir = tempfile::tempdir().unwrap();
    let curve = dir.path().join("curve.csv");
    std::fs::write(&curve, "value\n1\n2\n3\n4\n").unwrap();
    let out = mixbound(&["norms", "--profile", "iid", "--q", "4", "--r", "4", "--curve", curve.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v = json(&out);
    // mu = 1 on (0, 1/2] under independence: ||f||_q^2 = 2 (16 + 9) / 4.
    let q_norm = v["results"]["q_norm"].as_f64().unwrap();
    assert!((q_norm - 12.5f64.sqrt()).abs() < 1e-9, "{q_norm}");
    assert_eq!(v["results"]["mu_breakpoints"], serde_json::json!([0.5]));
}

#[test]
fn verify_grid_passes_and_exit_code_tracks_failures() {
    let out = mixbound(&["verify", "--suite", "grid", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    let ids: Vec<u64> = v["criteria"].as_array().unwrap().iter().map(|c| c["id"].as_u64().unwrap()).collect();
    assert_eq!(ids, vec![1, 2]);

    // The norms suite contains a criterion that does not hold.
    let out = mixbound(&["verify", "--suite", "norms"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_all_is_bit_identical_across_workers() {
    let one = mixbound(&["verify", "--suite", "all", "--seed", "7", "--workers", "1"]);
    let four = mixbound(&["verify", "--suite", "all", "--seed", "7", "--workers", "4"]);
    assert_eq!(one.stdout, four.stdout);
    let v = json(&one);
    let ids: Vec<u64> = v["criteria"].as_array().unwrap().iter().map(|c| c["id"].as_u64().unwrap()).collect();
    assert_eq!(ids, (1..=14).collect::<Vec<u64>>());
    let all_pass = v["criteria"].as_array().unwrap().iter().all(|c| c["status"] == "PASS");
    assert_eq!(one.status.code(), Some(if all_pass { 0 } else { 1 }));
}
