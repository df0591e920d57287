mod common;

use common::*;
use std::fs;

fn report(dir: &std::path::Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn full_pipeline_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(dir.path(), &[]);
    for name in ["data/manifest.json", "data/set0000.csv", "reps.json", "model.json", "model.loss.csv", "pred.csv", "pred.config.json", "ac.csv", "report.json"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let r = report(dir.path());
    assert_eq!(r["num_sets"], 24);
    assert!(r["overall_rmse_pct"].as_f64().unwrap() >= 0.0);
    assert_eq!(r["comparisons"][0]["name"], "AC");
    let trace = fs::read_to_string(dir.path().join("model.loss.csv")).unwrap();
    assert_eq!(trace.lines().count(), 16);
}

#[test]
fn ablation_flag_reaches_the_report() {
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(dir.path(), &["--ablate", "mean"]);
    let cfg = &report(dir.path())["config"]["prediction_config"]["model_config"];
    assert_eq!(cfg["use_mean"], false);
    assert_eq!(cfg["use_cov"], true);
    assert_eq!(cfg["use_var"], true);
}

#[test]
fn every_command_echoes_its_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("data");
    fs::write(dir.path().join("c.toml"), SMALL_CORPUS_TOML).unwrap();
    let stdout = autoeval_ok(&["gen", "--config", dir.path().join("c.toml").to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "9"]);
    assert!(stdout.contains("gen config:"));
    assert!(stdout.contains("\"seed\":9"));
}

#[test]
fn eval_rejects_length_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(dir.path(), &[]);
    let pred = dir.path().join("pred.csv");
    let text = fs::read_to_string(&pred).unwrap();
    let short: Vec<&str> = text.lines().take(5).collect();
    fs::write(&pred, short.join("\n") + "\n").unwrap();
    let (ok, _, stderr) = autoeval(&[
        "eval", "--pred", pred.to_str().unwrap(), "--manifest", dir.path().join("data").to_str().unwrap(),
        "--out", dir.path().join("r2.json").to_str().unwrap(),
    ]);
    assert!(!ok);
    assert!(stderr.starts_with("error:"), "{stderr}");
}

#[test]
fn missing_inputs_and_bad_options_fail() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    let out = dir.path().join("x").to_string_lossy().into_owned();
    assert!(!autoeval(&["extract", "--data", missing.to_str().unwrap(), "--out", &out]).0);
    assert!(!autoeval(&["baseline", "--data", missing.to_str().unwrap(), "--method", "ps", "--out", &out]).0);
    assert!(!autoeval(&["baseline", "--data", missing.to_str().unwrap(), "--method", "ps", "--tau1", "1.5", "--out", &out]).0);
    assert!(!autoeval(&["frobnicate"]).0);
}

#[test]
fn predict_refuses_mismatched_groups() {
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(dir.path(), &[]);
    let p = |n: &str| dir.path().join(n).to_string_lossy().into_owned();
    autoeval_ok(&["extract", "--data", &p("data"), "--groups", "high", "--out", &p("high.json")]);
    let (ok, _, stderr) = autoeval(&["predict", "--model", &p("model.json"), "--reps", &p("high.json"), "--out", &p("x.csv")]);
    assert!(!ok);
    assert!(stderr.contains("groups"), "{stderr}");
}
