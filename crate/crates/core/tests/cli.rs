mod common;

use std::process::{Command, Output};

use serde_json::Value;

fn flash(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flash"))
        .args(args)
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

#[test]
fn space_size_prints_exact_integer() {
    let out = flash(&["space", "size"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["size"], 31_966_698_504u64);
    assert_eq!(v["approx"], "3.20e10");
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(flash(&["--help"]).status.code(), Some(0));
    assert_eq!(flash(&["search", "--help"]).status.code(), Some(0));
    let bad = flash(&["frobnicate"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(bad.stdout.is_empty());
}

#[test]
fn degree_and_layers() {
    let arch = r#"{"w_m":1,"n_c":3,"d_c":5,"t":"5;10;20"}"#;
    let v = json(&flash(&["degree", "--arch", arch]));
    assert!(v["g"].as_f64().unwrap() > 0.0);
    assert_eq!(v["per_cell"].as_array().unwrap().len(), 3);

    let v = json(&flash(&["export", "layers", "--arch", arch]));
    assert_eq!(v["layers"].as_array().unwrap().len(), 15);
    let sum: u64 = v["layers"]
        .as_array()
        .unwrap()
        .iter()
        .map(|l| l["tiles"].as_u64().unwrap())
        .sum();
    assert_eq!(v["total_tiles"].as_u64().unwrap(), sum);
}

#[test]
fn invalid_architecture_is_a_usage_error() {
    let out = flash(&[
        "degree",
        "--arch",
        r#"{"w_m":1,"n_c":3,"d_c":5,"t":"5;9;20"}"#,
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    assert!(!out.stderr.is_empty());
}

#[test]
fn sampling_is_reproducible() {
    let a = flash(&["space", "sample", "--n", "5", "--seed", "3"]);
    let b = flash(&["space", "sample", "--n", "5", "--seed", "3"]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a).as_array().unwrap().len(), 5);
}

#[test]
fn predict_with_partial_models_reports_nulls() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let spec = common::data("fixture_spec.json");
    let spec = spec.to_str().unwrap();
    let fx = format!("{d}/fx");
    let models = format!("{d}/models");
    assert_eq!(
        flash(&["export", "fixtures", "--out", &fx, "--spec", spec])
            .status
            .code(),
        Some(0)
    );
    let samples = format!("{fx}/samples.csv");
    let fit = flash(&[
        "fit",
        "accuracy",
        "--samples",
        &samples,
        "--spec",
        spec,
        "--models",
        &models,
    ]);
    assert_eq!(
        fit.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&fit.stderr)
    );

    let arch = r#"{"w_m":2,"n_c":3,"d_c":6,"t":"3;8;20"}"#;
    let out = flash(&[
        "predict", "--arch", arch, "--models", &models, "--spec", spec,
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(v["theta"].as_f64().is_some());
    assert!(v["latency_ms"].is_null() && v["energy_mj"].is_null());
    assert!(v["area_mm2"].as_f64().unwrap() > 0.0);

    // Shgo needs hardware models: missing state exits with 3.
    let out = flash(&["search", "--models", &models, "--spec", spec]);
    assert_eq!(out.status.code(), Some(3));
    assert!(out.stdout.is_empty());
}

#[test]
fn brute_force_refuses_default_space() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let fx = format!("{d}/fx");
    let models = format!("{d}/models");
    assert_eq!(
        flash(&["export", "fixtures", "--out", &fx]).status.code(),
        Some(0)
    );
    let samples = format!("{fx}/samples.csv");
    for kind in ["accuracy", "latency", "energy", "area"] {
        let fit = flash(&["fit", kind, "--samples", &samples, "--models", &models]);
        assert_eq!(
            fit.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&fit.stderr)
        );
    }
    let out = flash(&["search", "--mode", "brute", "--models", &models]);
    assert_eq!(
        out.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("31966698504"));
}
