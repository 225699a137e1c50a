//! End-to-end CLI tests driving the compiled binary, including the
//! determinism acceptance check (byte-identical outputs across reruns and
//! thread counts).

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_stormloss")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn stormloss")
}

fn assert_code(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path
}

fn synthetic_config(dir: &Path, out: &Path, extra: &str) -> PathBuf {
    write_config(
        dir,
        &format!(
            r#"{{"synthetic": {{"n_zctas": 80, "n_storms": 4, "noise_sigma": 0.3}},
                "seed": 42, "out_dir": {:?}{extra}}}"#,
            out.to_str().unwrap()
        ),
    )
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("read {name}: {e}"))
}

#[test]
fn synth_writes_six_csvs_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config = synthetic_config(tmp.path(), &out, "");
    assert_code(&run(&["synth", "--config", config.to_str().unwrap()]), 0);
    for f in [
        "storms.csv",
        "hydro.csv",
        "buildings.csv",
        "losses.csv",
        "hpi.csv",
        "zcta_centroids.csv",
        "manifest.json",
    ] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&read(&out, "manifest.json")).unwrap();
    assert_eq!(manifest["seed"], 42);
    assert_eq!(manifest["hpi_baseline"], 820.29);

    // same config twice -> byte-identical files
    let first = read(&out, "losses.csv");
    assert_code(&run(&["synth", "--config", config.to_str().unwrap()]), 0);
    assert_eq!(first, read(&out, "losses.csv"));

    // --seed override lands in the manifest
    assert_code(
        &run(&["synth", "--config", config.to_str().unwrap(), "--seed", "7"]),
        0,
    );
    let manifest: serde_json::Value =
        serde_json::from_slice(&read(&out, "manifest.json")).unwrap();
    assert_eq!(manifest["seed"], 7);
}

#[test]
fn synth_single_zcta() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config = write_config(
        tmp.path(),
        &format!(
            r#"{{"synthetic": {{"n_zctas": 1, "n_storms": 1, "noise_sigma": 0.0}},
                "seed": 1, "out_dir": {:?}}}"#,
            out.to_str().unwrap()
        ),
    );
    assert_code(&run(&["synth", "--config", config.to_str().unwrap()]), 0);
    for f in ["hydro.csv", "buildings.csv", "zcta_centroids.csv", "losses.csv"] {
        let text = String::from_utf8(read(&out, f)).unwrap();
        assert_eq!(text.lines().count(), 2, "{f} should be header + 1 row");
    }
}

#[test]
fn train_predict_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config = synthetic_config(tmp.path(), &out, "");
    assert_code(&run(&["train", "--config", config.to_str().unwrap()]), 0);

    let doc: serde_json::Value = serde_json::from_slice(&read(&out, "model.json")).unwrap();
    assert_eq!(doc["kind"], "gbm");
    assert_eq!(doc["schema_version"], 1);

    // predict on the training CSV reproduces the stored training predictions
    let model = out.join("model.json");
    let rows = out.join("features.csv");
    let pred_out = tmp.path().join("pred");
    assert_code(
        &run(&[
            "predict",
            "--config",
            config.to_str().unwrap(),
            "--model",
            model.to_str().unwrap(),
            "--rows",
            rows.to_str().unwrap(),
            "--out",
            pred_out.to_str().unwrap(),
        ]),
        0,
    );
    assert_eq!(
        read(&out, "training_predictions.csv"),
        read(&pred_out, "predictions.csv")
    );

    // one prediction per input row, same order
    let features = String::from_utf8(read(&out, "features.csv")).unwrap();
    let preds = String::from_utf8(read(&pred_out, "predictions.csv")).unwrap();
    assert_eq!(features.lines().count(), preds.lines().count());
    let ids = |text: &str| -> Vec<String> {
        text.lines()
            .skip(1)
            .map(|l| l.split(',').next().unwrap().to_string())
            .collect()
    };
    assert_eq!(ids(&features), ids(&preds));
}

#[test]
fn train_stacked_kind_in_document() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    // a small stacked ensemble keeps this test quick
    let config = write_config(
        tmp.path(),
        &format!(
            r#"{{"synthetic": {{"n_zctas": 60, "n_storms": 3, "noise_sigma": 0.3}},
                "seed": 2, "out_dir": {:?},
                "model": {{"kind": "stacked",
                           "bases": [{{"gbm": {{"n_rounds": 10}}}},
                                      {{"xgb": {{"n_rounds": 10}}}}]}}}}"#,
            out.to_str().unwrap()
        ),
    );
    assert_code(&run(&["train", "--config", config.to_str().unwrap()]), 0);
    let doc: serde_json::Value = serde_json::from_slice(&read(&out, "model.json")).unwrap();
    assert_eq!(doc["kind"], "stacked");
}

#[test]
fn unknown_model_kind_exits_2_listing_kinds() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config = synthetic_config(tmp.path(), &out, r#", "model": {"kind": "svm"}"#);
    let result = run(&["train", "--config", config.to_str().unwrap()]);
    assert_code(&result, 2);
    let stderr = String::from_utf8_lossy(&result.stderr);
    for kind in ["forest", "gbm", "xgb", "mlp", "stacked"] {
        assert!(stderr.contains(kind), "stderr lacks {kind}: {stderr}");
    }
}

#[test]
fn evaluate_repeated_cv_and_holdout() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config = synthetic_config(
        tmp.path(),
        &out,
        r#", "model": {"kind": "gbm", "n_rounds": 10},
            "protocol": {"kind": "repeated-cv", "folds": 5, "repeats": 2}"#,
    );
    assert_code(&run(&["evaluate", "--config", config.to_str().unwrap()]), 0);
    let report: serde_json::Value = serde_json::from_slice(&read(&out, "report.json")).unwrap();
    assert_eq!(report["model"], "gbm");
    assert_eq!(report["seed"], 42);
    assert_eq!(report["folds"], 10);
    for metric in ["r2", "mae", "smape", "rmse", "rmsle"] {
        assert!(report["metrics"][metric]["mean"].is_number(), "{metric}");
        assert!(report["metrics"][metric]["std"].is_number(), "{metric}");
    }
    assert!(String::from_utf8(read(&out, "report.txt")).unwrap().contains("±"));

    // identical rerun -> identical report
    let first = read(&out, "report.json");
    assert_code(&run(&["evaluate", "--config", config.to_str().unwrap()]), 0);
    assert_eq!(first, read(&out, "report.json"));

    // holdout protocol reports a single fold
    let config = synthetic_config(
        tmp.path(),
        &out,
        r#", "model": {"kind": "gbm", "n_rounds": 10},
            "protocol": {"kind": "holdout", "fraction": 0.2}"#,
    );
    assert_code(&run(&["evaluate", "--config", config.to_str().unwrap()]), 0);
    let report: serde_json::Value = serde_json::from_slice(&read(&out, "report.json")).unwrap();
    assert_eq!(report["folds"], 1);
}

#[test]
fn importance_sorted_and_normalized() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config = synthetic_config(tmp.path(), &out, r#", "model": {"kind": "xgb"}"#);
    assert_code(&run(&["train", "--config", config.to_str().unwrap()]), 0);
    let model = out.join("model.json");
    assert_code(
        &run(&[
            "importance",
            "--config",
            config.to_str().unwrap(),
            "--model",
            model.to_str().unwrap(),
        ]),
        0,
    );
    let text = String::from_utf8(read(&out, "importance.csv")).unwrap();
    let shares: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(!shares.is_empty());
    assert!((shares.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    for w in shares.windows(2) {
        assert!(w[0] >= w[1], "not sorted descending: {w:?}");
    }
}

#[test]
fn importance_rejects_mlp() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config = synthetic_config(
        tmp.path(),
        &out,
        r#", "model": {"kind": "mlp", "max_epochs": 5}"#,
    );
    assert_code(&run(&["train", "--config", config.to_str().unwrap()]), 0);
    let model = out.join("model.json");
    let result = run(&[
        "importance",
        "--config",
        config.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
    ]);
    assert_code(&result, 2);
    assert!(String::from_utf8_lossy(&result.stderr).contains("tree ensemble"));
}

#[test]
fn report_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config = synthetic_config(tmp.path(), &out, "");
    assert_code(&run(&["report", "--config", config.to_str().unwrap()]), 0);
    let text = String::from_utf8(read(&out, "zcta_summary.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 80);
    for r in &rows {
        let _: f64 = r[3].parse().unwrap(); // adjusted_total_cost
    }
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    // missing config flag
    assert_code(&run(&["train"]), 2);
    // unreadable config path
    assert_code(&run(&["train", "--config", "/nonexistent/config.json"]), 2);
    // unknown key
    let config = write_config(
        tmp.path(),
        r#"{"synthetic": {"n_zctas": 5, "n_storms": 1, "noise_sigma": 0.1},
            "seed": 1, "out_dir": "/tmp/x", "extra_key": true}"#,
    );
    assert_code(&run(&["train", "--config", config.to_str().unwrap()]), 2);
}

#[test]
fn schema_error_exits_2_with_message() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = tmp.path().join("out");
    let config = synthetic_config(tmp.path(), &data, "");
    assert_code(&run(&["synth", "--config", config.to_str().unwrap()]), 0);
    // corrupt one header
    let storms = data.join("storms.csv");
    let text = std::fs::read_to_string(&storms).unwrap();
    std::fs::write(&storms, text.replacen("max_wind_kt", "windspeed", 1)).unwrap();
    let paths = |name: &str| data.join(name).to_str().unwrap().to_string();
    let config = write_config(
        &out.parent().unwrap().join("."),
        &format!(
            r#"{{"inputs": {{"storms": {:?}, "hydro": {:?}, "buildings": {:?},
                            "losses": {:?}, "hpi": {:?}, "zcta_centroids": {:?}}},
                "seed": 1, "out_dir": {:?}}}"#,
            paths("storms.csv"),
            paths("hydro.csv"),
            paths("buildings.csv"),
            paths("losses.csv"),
            paths("hpi.csv"),
            paths("zcta_centroids.csv"),
            out.to_str().unwrap()
        ),
    );
    let result = run(&["train", "--config", config.to_str().unwrap()]);
    assert_code(&result, 2);
    assert!(String::from_utf8_lossy(&result.stderr).contains("max_wind_kt"));
}

// criterion 7: byte-identical outputs across reruns and thread counts
#[test]
fn acceptance_7_determinism_across_threads() {
    let tmp = tempfile::tempdir().unwrap();
    let config_dir = tmp.path();

    let mut artifacts: Vec<Vec<Vec<u8>>> = Vec::new();
    for (label, threads) in [("a", "1"), ("b", "8"), ("c", "1")] {
        let out = tmp.path().join(label);
        let config = write_config(
            &config_dir.join("."),
            &format!(
                r#"{{"synthetic": {{"n_zctas": 120, "n_storms": 5, "noise_sigma": 0.3}},
                    "seed": 42, "out_dir": {:?},
                    "model": {{"kind": "forest", "n_trees": 30}},
                    "protocol": {{"kind": "repeated-cv", "folds": 5, "repeats": 1}}}}"#,
                out.to_str().unwrap()
            ),
        );
        let c = config.to_str().unwrap();
        assert_code(&run(&["train", "--config", c, "--threads", threads]), 0);
        assert_code(&run(&["evaluate", "--config", c, "--threads", threads]), 0);
        let model = out.join("model.json");
        assert_code(
            &run(&[
                "predict",
                "--config",
                c,
                "--model",
                model.to_str().unwrap(),
                "--rows",
                out.join("features.csv").to_str().unwrap(),
                "--threads",
                threads,
            ]),
            0,
        );
        artifacts.push(vec![
            read(&out, "model.json"),
            read(&out, "report.json"),
            read(&out, "predictions.csv"),
        ]);
    }
    assert_eq!(artifacts[0], artifacts[1], "threads 1 vs 8 differ");
    assert_eq!(artifacts[0], artifacts[2], "rerun differs");
    println!("ACCEPTANCE 7 (determinism across reruns and --threads 1 vs 8): PASS");
}
