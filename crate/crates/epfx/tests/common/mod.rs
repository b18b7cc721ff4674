#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use epfx::ingest::{day_from_ymd, format_day};
use epfx::synthetic::synthetic_csv;
use epfx_core::{MarketConfig, MarketId};
use serde_json::{json, Value};

pub fn epfx() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_epfx"));
    cmd.env_remove("EPFX_OUT").env_remove("EPFX_THREADS");
    cmd
}

pub fn run(args: &[&str]) -> Output {
    epfx().args(args).output().expect("binary runs")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Writes `market.csv` covering `days` window days plus the lag lead-in, and returns the
/// window's first and last day.
pub fn write_market(dir: &Path, market: MarketId, days: usize, seed: u64) -> (String, String) {
    let (first, _) = market.training_window();
    let lead = MarketConfig::builtin(market).max_lag() as i32;
    let first = day_from_ymd(first);
    std::fs::write(dir.join("market.csv"), synthetic_csv(first.offset(-lead), days + lead as usize, seed)).unwrap();
    (format_day(first), format_day(first.offset(days as i32 - 1)))
}

/// A small, quick configuration over a synthetic dataset.
pub fn small_config(dir: &Path, market: MarketId, days: usize) -> Value {
    let (_, end) = write_market(dir, market, days, 3);
    json!({
        "market": market,
        "dataset": "market.csv",
        "end": end,
        "seed": 11,
        "training": {"max_epochs": 4},
        "attribution": {"n_pairs": 3, "max_instances": 8, "background_size": 20},
        "lines": {"grid_points": 40},
    })
}

pub fn write_config(dir: &Path, config: &Value) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    path
}

pub fn output_hashes(run_dir: &Path) -> BTreeMap<String, String> {
    let manifest: Value = serde_json::from_slice(&std::fs::read(run_dir.join("manifest.json")).unwrap()).unwrap();
    serde_json::from_value(manifest["outputs"].clone()).unwrap()
}

pub fn files_with_ext(dir: &Path, ext: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .map(|rd| rd.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.extension().is_some_and(|e| e == ext)).collect())
        .unwrap_or_default();
    v.sort();
    v
}
