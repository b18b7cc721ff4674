mod common;

use std::path::Path;

use common::*;
use epfx_core::MarketId;
use serde_json::{json, Value};

fn assert_single_line_error(out: &std::process::Output, code: i32, tag: &str) {
    assert_eq!(out.status.code(), Some(code), "stderr: {}", stderr(out));
    let err = stderr(out);
    assert_eq!(err.lines().count(), 1, "stderr: {err}");
    assert!(err.starts_with(&format!("epfx: error[{tag}]")), "stderr: {err}");
}

fn pipeline(config: &Path, out: &Path, threads: &str) {
    for stage in ["train", "explain"] {
        let o = run(&[stage, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", threads]);
        assert!(o.status.success(), "{stage}: {}", stderr(&o));
    }
    let o = run(&["report", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "report: {}", stderr(&o));
}

#[test]
fn validate_accepts_a_good_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_config(dir.path(), MarketId::Np, 30));
    let o = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("config ok"));
}

#[test]
fn missing_dataset_exits_with_data_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path(), MarketId::Np, 30);
    cfg["dataset"] = json!("nowhere/prices.csv");
    let path = write_config(dir.path(), &cfg);
    let o = run(&["train", "--config", path.to_str().unwrap()]);
    assert_single_line_error(&o, 3, "data");
    assert!(stderr(&o).contains("nowhere/prices.csv"));
}

#[test]
fn invalid_configs_exit_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let base = small_config(dir.path(), MarketId::Np, 30);
    for (key, value) in [("no_such_key", json!(1)), ("market", json!("XX")), ("lines", json!({"bandwidth": -1.0}))] {
        let mut cfg = base.clone();
        cfg[key] = value;
        let path = write_config(dir.path(), &cfg);
        assert_single_line_error(&run(&["validate", "--config", path.to_str().unwrap()]), 2, "config");
    }
    std::fs::write(dir.path().join("broken.json"), "{ not json").unwrap();
    let broken = dir.path().join("broken.json");
    assert_single_line_error(&run(&["validate", "--config", broken.to_str().unwrap()]), 2, "config");
    assert_single_line_error(&run(&["validate", "--config", "/nonexistent/config.json"]), 2, "config");
}

#[test]
fn usage_errors_exit_with_config_code() {
    assert_single_line_error(&run(&["train"]), 2, "config");
    assert_single_line_error(&run(&["frobnicate"]), 2, "config");
    assert!(run(&["--help"]).status.success());
    assert!(run(&["--version"]).status.success());
}

#[test]
fn report_without_manifest_is_incomplete() {
    let dir = tempfile::tempdir().unwrap();
    assert_single_line_error(&run(&["report", "--out", dir.path().to_str().unwrap()]), 6, "run");
}

#[test]
fn explaining_with_a_foreign_model_is_a_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_config(dir.path(), MarketId::Np, 30));
    let model = dir.path().join("fr.json");
    std::fs::write(&model, epfx::model_file::save_model(&epfx::oracle::french_sized_model(1))).unwrap();
    let o = run(&["explain", "--config", cfg.to_str().unwrap(), "--model", model.to_str().unwrap()]);
    assert_single_line_error(&o, 5, "model");

    let o = run(&["explain", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("empty").to_str().unwrap()]);
    assert_single_line_error(&o, 5, "model");
}

#[test]
fn exploding_training_exits_with_training_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path(), MarketId::Np, 160);
    cfg["training"] = json!({"max_epochs": 3, "learning_rate": 1e300});
    let path = write_config(dir.path(), &cfg);
    assert_single_line_error(&run(&["train", "--config", path.to_str().unwrap()]), 4, "training");
}

#[test]
fn instance_dates_outside_the_window_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path(), MarketId::Np, 160);
    cfg["instance_dates"] = json!(["1999-01-01"]);
    let path = write_config(dir.path(), &cfg);
    let o = run(&["explain", "--config", path.to_str().unwrap()]);
    assert!(matches!(o.status.code(), Some(2) | Some(5)), "{}", stderr(&o));
}

#[test]
fn full_run_is_deterministic_and_self_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path(), MarketId::Np, 160);
    let (first, _) = MarketId::Np.training_window();
    let picked = epfx::ingest::format_day(epfx::ingest::day_from_ymd(first).offset(20));
    cfg["instance_dates"] = json!([picked]);
    let cfg_path = write_config(dir.path(), &cfg);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    pipeline(&cfg_path, &a, "1");
    pipeline(&cfg_path, &b, "2");

    // identical outputs regardless of worker count
    let ha = output_hashes(&a);
    let hb = output_hashes(&b);
    assert_eq!(ha, hb);
    for (rel, hash) in &ha {
        assert_eq!(&epfx::pipeline::sha256_hex(&std::fs::read(a.join(rel)).unwrap()), hash, "{rel}");
    }

    // every figure has its table and appears in the summary
    let svgs = files_with_ext(&a.join("figures"), "svg");
    assert!(svgs.len() >= 6);
    for svg in &svgs {
        let stem = svg.file_stem().unwrap().to_str().unwrap();
        assert!(a.join("tables").join(format!("{stem}.csv")).is_file(), "{stem}");
    }
    let summary = std::fs::read_to_string(a.join("summary.md")).unwrap();
    assert_eq!(summary.matches("![").count(), svgs.len());
    assert!(summary.contains("| training_set |"));
    let instance_fig = format!("instance_{picked}_super_variables.svg");
    assert!(a.join("figures").join(&instance_fig).is_file(), "{instance_fig}");

    // the echoed config reproduces the run
    let report: Value = serde_json::from_slice(&std::fs::read(a.join("report.json")).unwrap()).unwrap();
    let echo = report["config"].clone();
    let echo_path = dir.path().join("echo.json");
    std::fs::write(&echo_path, serde_json::to_vec(&echo).unwrap()).unwrap();
    let c = dir.path().join("c");
    let o = run(&["train", "--config", echo_path.to_str().unwrap(), "--out", c.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(output_hashes(&c)["model.json"], ha["model.json"]);

    // a different seed changes the model
    let d = dir.path().join("d");
    let o = run(&["train", "--config", cfg_path.to_str().unwrap(), "--out", d.to_str().unwrap(), "--seed", "12"]);
    assert!(o.status.success());
    assert_ne!(output_hashes(&d)["model.json"], ha["model.json"]);

    // tampering is detected
    let table = a.join("tables").join("performance.csv");
    std::fs::write(&table, "split\n").unwrap();
    assert_single_line_error(&run(&["report", "--out", a.to_str().unwrap()]), 6, "run");
}
