//! Pipeline stages behind the command-line subcommands.
//!
//! A run directory holds `model.json`, `report.json`, `manifest.json`, `summary.md` and
//! the `figures/` and `tables/` trees. Each stage records the files it wrote in the
//! manifest and removes its own stale outputs before writing new ones.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Component, Path, PathBuf};
use std::time::Instant;

use epfx_core::analytics::{
    beeswarm_table, complexity_metrics, heatmap, hourly_importance, instance_stack, naive_forecast, performance_metrics,
    Aggregation, ComplexityReport, PerformanceReport,
};
use epfx_core::attribution::{AttributionTensor, BackgroundSet, ShapConfig};
use epfx_core::sshap::{
    aggregate, observations, price_grid, slope_band, slope_check, sshap_line, HourSelector, Partition, SlopeCheck,
    SshapTensor, GRID_PERCENTILES,
};
use epfx_core::{build_feature_matrix, FeatureMatrix, HourlySeries, ModelSpec, TrainedModel, HOURS};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{Resolved, RunConfig, Seeds, BASE_PARTITION};
use crate::error::{CliError, CliResult, ErrorKind};
use crate::export;
use crate::ingest::{format_day, load_market_csv};
use crate::model_file::{read_model, save_model};
use crate::render::{self, Figure};

pub const MANIFEST: &str = "manifest.json";
pub const REPORT: &str = "report.json";
pub const SUMMARY: &str = "summary.md";
pub const MODEL: &str = "model.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn hash_file(path: &Path) -> CliResult<String> {
    fs::read(path).map(|b| sha256_hex(&b)).map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StageRecord {
    pub wall_clock_seconds: f64,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub seeds: Seeds,
    pub threads: usize,
    pub inputs: BTreeMap<String, InputRecord>,
    /// Relative path to SHA-256 of every file written by any stage.
    pub outputs: BTreeMap<String, String>,
    pub stages: BTreeMap<String, StageRecord>,
}

pub fn read_manifest(run_dir: &Path) -> CliResult<Manifest> {
    let path = run_dir.join(MANIFEST);
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::new(ErrorKind::IncompleteRun, format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::new(ErrorKind::IncompleteRun, format!("invalid manifest {}: {e}", path.display())))
}

fn is_plain_relative(rel: &str) -> bool {
    Path::new(rel).components().all(|c| matches!(c, Component::Normal(_)))
}

/// Collects the files a stage writes under the run directory.
struct Out {
    root: PathBuf,
    written: Vec<String>,
}

impl Out {
    fn new(root: &Path) -> Self {
        Out { root: root.to_path_buf(), written: Vec::new() }
    }

    fn path(&self, rel: &str) -> CliResult<PathBuf> {
        let p = self.root.join(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        Ok(p)
    }

    fn bytes(&mut self, rel: &str, data: &[u8]) -> CliResult<()> {
        let p = self.path(rel)?;
        fs::write(&p, data).map_err(|e| CliError::io(&p, e))?;
        self.written.push(rel.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_vec_pretty(value).expect("serialisable");
        text.push(b'\n');
        self.bytes(rel, &text)
    }

    fn csv(&mut self, rel: &str, f: impl FnOnce(&mut BufWriter<fs::File>) -> csv::Result<()>) -> CliResult<()> {
        let p = self.path(rel)?;
        let file = fs::File::create(&p).map_err(|e| CliError::io(&p, e))?;
        let mut w = BufWriter::new(file);
        f(&mut w).map_err(|e| CliError::new(ErrorKind::Io, format!("{}: {e}", p.display())))?;
        w.flush().map_err(|e| CliError::io(&p, e))?;
        self.written.push(rel.to_string());
        Ok(())
    }

    fn figure(&mut self, name: &str, fig: &Figure) -> CliResult<()> {
        self.bytes(&format!("figures/{name}.svg"), fig.svg.as_bytes())?;
        self.bytes(&format!("tables/{name}.csv"), fig.csv.as_bytes())
    }
}

/// Removes the outputs a previous run of `stages` left behind.
fn clear_stage_outputs(run_dir: &Path, stages: &[&str]) {
    let Ok(manifest) = read_manifest(run_dir) else { return };
    for stage in stages {
        if let Some(record) = manifest.stages.get(*stage) {
            for rel in record.outputs.iter().filter(|r| is_plain_relative(r)) {
                let _ = fs::remove_file(run_dir.join(rel));
            }
        }
    }
}

/// Records a finished stage in the manifest and re-hashes every recorded output.
fn update_manifest(res: &Resolved, stage: &str, record: StageRecord, reset: &[&str]) -> CliResult<Manifest> {
    let root = &res.output_dir;
    let mut stages = read_manifest(root).map(|m| m.stages).unwrap_or_default();
    for s in reset {
        stages.remove(*s);
    }
    stages.insert(stage.to_string(), record);
    let mut outputs = BTreeMap::new();
    for rec in stages.values() {
        for rel in &rec.outputs {
            outputs.insert(rel.clone(), hash_file(&root.join(rel))?);
        }
    }
    let mut inputs = BTreeMap::new();
    inputs.insert("dataset".to_string(), InputRecord { path: res.dataset.clone(), sha256: hash_file(&res.dataset)? });
    if let Some(cfg) = &res.config_path {
        inputs.insert("config".to_string(), InputRecord { path: cfg.clone(), sha256: hash_file(cfg)? });
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: res.echo(),
        seeds: res.seeds,
        threads: res.threads,
        inputs,
        outputs,
        stages,
    };
    let mut out = Out::new(root);
    out.json(MANIFEST, &manifest)?;
    Ok(manifest)
}

fn core_error(kind: ErrorKind, context: &str) -> impl Fn(epfx_core::Error) -> CliError + '_ {
    move |e| CliError::new(kind, format!("{context}: {e}"))
}

/// Loaded, windowed data and its feature matrix.
pub struct Prepared {
    pub series: HourlySeries,
    pub features: FeatureMatrix,
}

pub fn prepare(res: &Resolved) -> CliResult<Prepared> {
    let full = load_market_csv(&res.dataset, res.raw.market)?;
    // keep the lags that precede the window start
    let lead = res.market_config.max_lag() as i32;
    let series = full
        .slice_days(res.window.0.offset(-lead), res.window.1)
        .map_err(core_error(ErrorKind::Data, "dataset does not cover the configured window"))?;
    let mut features = build_feature_matrix(&series, &res.market_config).map_err(core_error(ErrorKind::Data, "features"))?;
    let keep: Vec<usize> = (0..features.n_instances()).filter(|&i| features.instances[i] >= res.window.0).collect();
    if keep.len() != features.n_instances() {
        features = features.select(&keep);
    }
    if features.n_instances() == 0 {
        return Err(CliError::data("no complete instances in the configured window"));
    }
    Ok(Prepared { series, features })
}

fn base_report(res: &Resolved, prepared: &Prepared) -> CliResult<Value> {
    let mut echo = res.echo();
    echo.output_dir = None;
    echo.threads = None;
    Ok(json!({
        "market": res.raw.market,
        "currency": res.market_config.currency,
        "config": echo,
        "seeds": res.seeds,
        "data": {
            "dataset_sha256": hash_file(&res.dataset)?,
            "hours": prepared.series.len(),
            "first_instance": format_day(prepared.features.instances[0]),
            "last_instance": format_day(*prepared.features.instances.last().expect("nonempty")),
            "instances": prepared.features.n_instances(),
            "features": prepared.features.n_features(),
        },
    }))
}

fn read_report(run_dir: &Path) -> Option<Value> {
    fs::read_to_string(run_dir.join(REPORT)).ok().and_then(|t| serde_json::from_str(&t).ok())
}

/// Model predictions for every instance, `[instance][hour]`.
pub fn predict_all(model: &TrainedModel, features: &FeatureMatrix) -> CliResult<Vec<f64>> {
    let mut out = Vec::with_capacity(features.n_instances() * HOURS);
    for row in features.rows() {
        out.extend(model.predict_prices(row).map_err(core_error(ErrorKind::Training, "prediction"))?);
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(CliError::new(ErrorKind::Training, "model produced non-finite prices"));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainOutcome {
    pub model_sha256: String,
    pub training_set: PerformanceReport,
    pub fit_slice: PerformanceReport,
    pub validation_slice: PerformanceReport,
    pub epochs_run: usize,
    pub best_epoch: usize,
}

fn metrics_on(
    range: std::ops::Range<usize>,
    predicted: &[f64],
    actual: &[f64],
    naive: &[Option<Vec<f64>>],
) -> CliResult<PerformanceReport> {
    let (mut p, mut a, mut nv) = (Vec::new(), Vec::new(), Vec::new());
    for i in range {
        if let Some(n) = &naive[i] {
            p.extend_from_slice(&predicted[i * HOURS..(i + 1) * HOURS]);
            a.extend_from_slice(&actual[i * HOURS..(i + 1) * HOURS]);
            nv.extend_from_slice(n);
        }
    }
    performance_metrics(&p, &a, &nv).map_err(core_error(ErrorKind::Data, "performance metrics"))
}

/// Trains the configured model and writes the model file, forecasts and error metrics.
pub fn cmd_train(res: &Resolved) -> CliResult<TrainOutcome> {
    let started = Instant::now();
    let prepared = prepare(res)?;
    let features = &prepared.features;
    let model = TrainedModel::init(res.model.clone()).map_err(core_error(ErrorKind::Config, "model"))?;
    let model = epfx_core::train::train(model, features, &res.training).map_err(|e| match e {
        epfx_core::Error::DivergedLoss(_) | epfx_core::Error::NonFiniteModelOutput => {
            CliError::new(ErrorKind::Training, format!("training diverged: {e}"))
        }
        other => CliError::data(format!("training: {other}")),
    })?;

    let predicted = predict_all(&model, features)?;
    let naive = naive_forecast(&prepared.series).map_err(core_error(ErrorKind::Data, "naive forecast"))?;
    let naive_rows: Vec<Option<Vec<f64>>> = features.instances.iter().map(|d| naive.for_days(&[*d])).collect();
    let n = features.n_instances();
    let n_fit = n - res.training.validation_len(n);
    let training_set = metrics_on(0..n, &predicted, &features.targets, &naive_rows)?;
    let fit_slice = metrics_on(0..n_fit, &predicted, &features.targets, &naive_rows)?;
    let validation_slice = metrics_on(n_fit..n, &predicted, &features.targets, &naive_rows)?;

    clear_stage_outputs(&res.output_dir, &["train", "explain", "report"]);
    let mut out = Out::new(&res.output_dir);
    let model_bytes = save_model(&model);
    out.bytes(MODEL, &model_bytes)?;
    let model_sha256 = sha256_hex(&model_bytes);
    let naive_flat: Vec<f64> =
        naive_rows.iter().flat_map(|r| r.clone().unwrap_or_else(|| vec![f64::NAN; HOURS])).collect();
    out.csv("tables/forecasts.csv", |w| export::write_forecasts(&features.instances, &features.targets, &predicted, &naive_flat, w))?;
    out.csv("tables/performance.csv", |w| {
        export::write_performance(&[("training_set", training_set), ("fit_slice", fit_slice), ("validation_slice", validation_slice)], w)
    })?;
    out.csv("tables/training_history.csv", |w| export::write_history(&model.history, w))?;

    let best_epoch = model
        .history
        .iter()
        .min_by(|a, b| a.val_mae.total_cmp(&b.val_mae).then(a.epoch.cmp(&b.epoch)))
        .map_or(0, |r| r.epoch);
    let outcome = TrainOutcome {
        model_sha256,
        training_set,
        fit_slice,
        validation_slice,
        epochs_run: model.history.len(),
        best_epoch,
    };
    let mut report = base_report(res, &prepared)?;
    report["train"] = json!({
        "model_file": MODEL,
        "model_sha256": outcome.model_sha256,
        "parameter_count": model.parameter_count(),
        "epochs_run": outcome.epochs_run,
        "best_epoch": outcome.best_epoch,
        "best_validation_mae_normalised": model.history.get(best_epoch).map(|r| r.val_mae),
        "fit_instances": n_fit,
        "validation_instances": n - n_fit,
        "performance": {
            "training_set": training_set,
            "fit_slice": fit_slice,
            "validation_slice": validation_slice,
        },
    });
    out.json(REPORT, &report)?;
    let record = StageRecord { wall_clock_seconds: started.elapsed().as_secs_f64(), outputs: out.written };
    update_manifest(res, "train", record, &["explain", "report"])?;
    Ok(outcome)
}

/// Architecture equality ignoring the initialisation seed.
fn same_architecture(a: &ModelSpec, b: &ModelSpec) -> bool {
    let mut b = b.clone();
    b.seed = a.seed;
    *a == b
}

/// Explained instance positions: all of them, or a seeded sample plus the configured dates.
pub fn select_positions(res: &Resolved, features: &FeatureMatrix) -> CliResult<Vec<usize>> {
    let n = features.n_instances();
    let mut positions: Vec<usize> = match res.raw.attribution.max_instances {
        Some(k) if k < n => {
            let mut rng = ChaCha8Rng::seed_from_u64(res.seeds.instance_sample);
            rand::seq::index::sample(&mut rng, n, k).into_vec()
        }
        _ => (0..n).collect(),
    };
    for day in &res.instance_days {
        let p = features.position(*day).ok_or_else(|| {
            CliError::config(format!("instance date {} is not an instance of the configured window", format_day(*day)))
        })?;
        positions.push(p);
    }
    positions.sort_unstable();
    positions.dedup();
    Ok(positions)
}

#[derive(Debug, Clone, Serialize)]
pub struct PartitionOutcome {
    pub name: String,
    pub groups: Vec<String>,
    pub slope_check: Option<SlopeCheck>,
    pub band: Option<(f64, f64)>,
    pub baseline: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExplainOutcome {
    pub instances: usize,
    pub complexity: Option<ComplexityReport>,
    pub partitions: Vec<PartitionOutcome>,
    /// Largest relative gap between summed SHAP values and `m(x) − baseline`.
    pub efficiency_max_rel_err: f64,
}

/// Mean baseline over the observations used for SSHAP lines.
fn line_baseline(sshap: &SshapTensor, mode: HourSelector) -> f64 {
    let m = sshap.n_outputs;
    let n = sshap.n_instances();
    match mode {
        HourSelector::Hour(h) => (0..n).map(|i| sshap.baseline[i * m + h as usize]).sum::<f64>() / n as f64,
        _ => sshap.baseline.iter().sum::<f64>() / sshap.baseline.len() as f64,
    }
}

fn efficiency_error(shap: &AttributionTensor, forecasts: &[f64]) -> f64 {
    let nf = shap.n_features();
    let mut worst: f64 = 0.0;
    for i in 0..shap.n_instances() {
        for h in 0..shap.n_outputs {
            let start = (i * shap.n_outputs + h) * nf;
            let total: f64 = shap.values[start..start + nf].iter().sum();
            let fx = forecasts[i * shap.n_outputs + h];
            let b = shap.baseline[i * shap.n_outputs + h];
            let denom = fx.abs().max(b.abs()).max(f64::MIN_POSITIVE);
            worst = worst.max((total - (fx - b)).abs() / denom);
        }
    }
    worst
}

/// Explains the trained model and writes every attribution artifact.
pub fn cmd_explain(res: &Resolved, model_path: Option<&Path>) -> CliResult<ExplainOutcome> {
    let started = Instant::now();
    let model_path = model_path.map_or_else(|| res.output_dir.join(MODEL), Path::to_path_buf);
    let model = read_model(&model_path)?;
    if !same_architecture(&model.spec, &res.model) {
        return Err(CliError::new(
            ErrorKind::ModelMismatch,
            format!("model {} does not match the configured architecture", model_path.display()),
        ));
    }
    let prepared = prepare(res)?;
    let features = &prepared.features;
    if model.spec.n_inputs() != features.n_features() {
        return Err(CliError::new(
            ErrorKind::ModelMismatch,
            format!("model expects {} inputs, data provides {}", model.spec.n_inputs(), features.n_features()),
        ));
    }
    let unit = res.market_config.currency.clone();
    let positions = select_positions(res, features)?;
    let background = BackgroundSet::sample(features, res.raw.attribution.background_size, res.seeds.background)
        .map_err(core_error(ErrorKind::Data, "background"))?;
    let shap_cfg = ShapConfig { n_pairs: res.raw.attribution.n_pairs, antithetic: res.raw.attribution.antithetic };
    let (shap, grad) = crate::parallel::explain_dataset(
        &model,
        features,
        &positions,
        &background,
        shap_cfg,
        res.seeds.attribution,
        res.threads,
    )
    .map_err(core_error(ErrorKind::Training, "attribution"))?;
    let explained = features.select(&positions);
    let forecasts = predict_all(&model, &explained)?;

    clear_stage_outputs(&res.output_dir, &["explain", "report"]);
    let mut out = Out::new(&res.output_dir);
    out.csv("tables/shap_values.csv", |w| export::write_attribution(&shap, w))?;
    out.csv("tables/gradient_values.csv", |w| export::write_attribution(&grad, w))?;
    out.json("tables/shap_baseline.json", &export::baseline_sidecar(&shap))?;

    let shap_map = heatmap(&shap, Aggregation::MeanAbs).map_err(core_error(ErrorKind::Data, "heatmap"))?;
    let grad_map = heatmap(&grad, Aggregation::Mean).map_err(core_error(ErrorKind::Data, "heatmap"))?;
    out.figure("heatmap_shap", &render::heatmap_figure(&shap_map, "Mean |SHAP| by input and output hour", &unit))?;
    out.figure(
        "heatmap_gradient",
        &render::heatmap_figure(&grad_map, "Mean gradient by input and output hour", &format!("{unit} per normalised unit")),
    )?;

    let complexity = complexity_metrics(&grad, &shap_map, res.raw.importance_threshold).ok();
    if let Some(c) = &complexity {
        out.csv("tables/complexity.csv", |w| export::write_complexity(c, res.raw.importance_threshold, w))?;
    }

    let bees = beeswarm_table(&shap, &explained.values, res.raw.attribution.beeswarm_top_k)
        .map_err(core_error(ErrorKind::Data, "beeswarm"))?;
    out.figure("beeswarm", &render::beeswarm_figure(&bees, &shap.instances, "Top features by mean |SHAP|", &unit))?;

    let base = Partition::by_super_variable(&shap.features).map_err(core_error(ErrorKind::Config, "partition"))?;
    let mut partitions = vec![(BASE_PARTITION.to_string(), base.clone())];
    for spec in &res.partitions {
        partitions.push((spec.name.clone(), spec.build(&base).map_err(core_error(ErrorKind::Config, "partition"))?));
    }
    let mode = res.raw.lines.mode;
    let mut partition_outcomes = Vec::new();
    let mut slope_rows = Vec::new();
    for (name, partition) in &partitions {
        let sshap = aggregate(&shap, partition).map_err(core_error(ErrorKind::Config, "aggregate"))?;
        out.csv(&format!("tables/sshap_{name}.csv"), |w| export::write_sshap(&sshap, w))?;
        let imp = hourly_importance(&sshap).map_err(core_error(ErrorKind::Data, "importance"))?;
        out.figure(&format!("importance_{name}"), &render::importance_figure(&imp, &format!("Mean |SSHAP| through the day ({name})"), &unit))?;

        let (xs, _) = observations(&sshap, 0, mode, &explained.targets).map_err(core_error(ErrorKind::Data, "lines"))?;
        let baseline = line_baseline(&sshap, mode);
        let mut lines = Vec::new();
        let mut check = None;
        let mut band = None;
        if let Ok(grid) = price_grid(&xs, res.raw.lines.grid_points, GRID_PERCENTILES) {
            for g in &partition.groups {
                lines.push(
                    sshap_line(&sshap, &g.label, mode, &explained.targets, res.raw.lines.bandwidth, &grid)
                        .map_err(core_error(ErrorKind::Data, "lines"))?,
                );
            }
            let b = slope_band(&xs);
            check = slope_check(&lines, baseline, b).ok();
            band = Some(b);
        }
        out.figure(&format!("sshap_lines_{name}"), &render::lines_figure(&lines, &format!("SSHAP lines ({name})"), &unit))?;
        if let (Some(c), Some(b)) = (check, band) {
            slope_rows.push((name.clone(), c, b, baseline));
        }

        for day in &res.instance_days {
            let i = shap.instances.binary_search(day).expect("configured dates are explained");
            let stack = instance_stack(&sshap, i, &forecasts[i * HOURS..(i + 1) * HOURS], explained.target(i))
                .map_err(core_error(ErrorKind::Data, "instance"))?;
            let date = format_day(*day);
            out.figure(
                &format!("instance_{date}_{name}"),
                &render::instance_stack_figure(&stack, &format!("Explanation of the forecast for {date} ({name})"), &unit),
            )?;
        }
        partition_outcomes.push(PartitionOutcome {
            name: name.clone(),
            groups: partition.labels().iter().map(|s| s.to_string()).collect(),
            slope_check: check,
            band,
            baseline,
        });
    }
    out.csv("tables/slope_check.csv", |w| export::write_slope_checks(&slope_rows, w))?;

    let outcome = ExplainOutcome {
        instances: positions.len(),
        complexity,
        partitions: partition_outcomes,
        efficiency_max_rel_err: efficiency_error(&shap, &forecasts),
    };
    let mut report = read_report(&res.output_dir).filter(|r| r.get("train").is_some()).unwrap_or(base_report(res, &prepared)?);
    report["explain"] = json!({
        "model_sha256": hash_file(&model_path)?,
        "instances_explained": outcome.instances,
        "instances_sampled": res.raw.attribution.max_instances.is_some_and(|k| k < features.n_instances()),
        "background_rows": background.len(),
        "n_pairs": shap_cfg.n_pairs,
        "antithetic": shap_cfg.antithetic,
        "mean_baseline": shap.mean_baseline(),
        "efficiency_max_rel_err": outcome.efficiency_max_rel_err,
        "heatmaps": {
            "shap": {"aggregation": "mean_abs", "blocks": shap_map.blocks.len(), "cells": shap_map.cells().count()},
            "gradient": {"aggregation": "mean", "blocks": grad_map.blocks.len(), "cells": grad_map.cells().count()},
        },
        "complexity": outcome.complexity,
        "importance_threshold": res.raw.importance_threshold,
        "beeswarm": bees.iter().enumerate().map(|(r, b)| json!({"rank": r + 1, "feature": b.feature.to_string(), "score": b.score})).collect::<Vec<_>>(),
        "partitions": outcome.partitions,
        "line_mode": mode,
        "bandwidth": res.raw.lines.bandwidth,
        "instance_dates": res.instance_days.iter().map(|d| format_day(*d)).collect::<Vec<_>>(),
    });
    out.json(REPORT, &report)?;
    let record = StageRecord { wall_clock_seconds: started.elapsed().as_secs_f64(), outputs: out.written };
    update_manifest(res, "explain", record, &["report"])?;
    Ok(outcome)
}

fn fmt_metric(v: &Value) -> String {
    v.as_f64().map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

/// Writes `summary.md` for a complete run directory and returns its path.
pub fn cmd_report(run_dir: &Path) -> CliResult<PathBuf> {
    let started = Instant::now();
    let incomplete = |msg: String| CliError::new(ErrorKind::IncompleteRun, msg);
    let manifest = read_manifest(run_dir)?;
    for (rel, hash) in &manifest.outputs {
        if rel == SUMMARY {
            continue;
        }
        let path = run_dir.join(rel);
        if !path.is_file() {
            return Err(incomplete(format!("{} lists {rel} but it is missing", MANIFEST)));
        }
        if &hash_file(&path)? != hash {
            return Err(incomplete(format!("{rel} does not match its recorded hash")));
        }
    }
    let report = read_report(run_dir).ok_or_else(|| incomplete(format!("{} is missing or invalid", REPORT)))?;

    let mut md = String::new();
    let market = report["market"].as_str().unwrap_or("?");
    let unit = report["currency"].as_str().unwrap_or("");
    md.push_str(&format!("# Run summary: {market}\n\n"));
    md.push_str(&format!("- tool: {} {}\n", manifest.tool, manifest.version));
    md.push_str(&format!("- run seed: {}\n", manifest.seeds.run));
    if let Some(d) = report.get("data") {
        md.push_str(&format!(
            "- instances: {} ({} to {}), features: {}\n",
            d["instances"], d["first_instance"].as_str().unwrap_or("?"), d["last_instance"].as_str().unwrap_or("?"), d["features"]
        ));
        md.push_str(&format!("- dataset sha256: `{}`\n", d["dataset_sha256"].as_str().unwrap_or("?")));
    }
    md.push('\n');

    md.push_str(&format!("## Forecast performance\n\nMAE and RMSE in {unit}; sMAPE as a fraction; rMAE relative to the naive forecast.\n\n"));
    md.push_str("| split | MAE | rMAE | sMAPE | RMSE |\n|---|---|---|---|---|\n");
    match report.pointer("/train/performance").and_then(Value::as_object) {
        Some(perf) => {
            for split in ["training_set", "fit_slice", "validation_slice"] {
                if let Some(p) = perf.get(split) {
                    md.push_str(&format!(
                        "| {split} | {} | {} | {} | {} |\n",
                        fmt_metric(&p["mae"]),
                        fmt_metric(&p["rmae"]),
                        fmt_metric(&p["smape"]),
                        fmt_metric(&p["rmse"])
                    ));
                }
            }
        }
        None => md.push_str("| (not trained in this run) | | | | |\n"),
    }

    md.push_str("\n## Explanation complexity\n\n");
    md.push_str("| non-linearity | non-homogeneity | important variables per hour |\n|---|---|---|\n");
    match report.pointer("/explain/complexity").filter(|v| !v.is_null()) {
        Some(c) => md.push_str(&format!(
            "| {} | {} | {} |\n",
            fmt_metric(&c["non_linearity"]),
            fmt_metric(&c["non_homogeneity"]),
            fmt_metric(&c["important_vars_per_hour"])
        )),
        None => md.push_str("| n/a | n/a | n/a |\n"),
    }

    if let Some(parts) = report.pointer("/explain/partitions").and_then(Value::as_array) {
        md.push_str("\n## Slope check of summed SSHAP lines\n\n| partition | fitted slope | max deviation |\n|---|---|---|\n");
        for p in parts {
            let c = &p["slope_check"];
            md.push_str(&format!(
                "| {} | {} | {} |\n",
                p["name"].as_str().unwrap_or("?"),
                fmt_metric(&c["fitted_slope"]),
                fmt_metric(&c["max_deviation"])
            ));
        }
    }

    let mut figures: Vec<&String> = manifest.outputs.keys().filter(|k| k.starts_with("figures/") && k.ends_with(".svg")).collect();
    figures.sort();
    md.push_str("\n## Figures\n\n");
    for f in &figures {
        let name = Path::new(f.as_str()).file_stem().and_then(|s| s.to_str()).unwrap_or(f);
        md.push_str(&format!("### {name}\n\n![{name}]({f})\n\n"));
    }
    md.push_str("## Tables\n\n");
    for t in manifest.outputs.keys().filter(|k| k.starts_with("tables/") || *k == REPORT || *k == MODEL) {
        md.push_str(&format!("- [{t}]({t})\n"));
    }

    fs::write(run_dir.join(SUMMARY), &md).map_err(|e| CliError::io(&run_dir.join(SUMMARY), e))?;
    let mut manifest = manifest;
    manifest.stages.insert(
        "report".to_string(),
        StageRecord { wall_clock_seconds: started.elapsed().as_secs_f64(), outputs: vec![SUMMARY.to_string()] },
    );
    manifest.outputs.insert(SUMMARY.to_string(), sha256_hex(md.as_bytes()));
    let mut text = serde_json::to_vec_pretty(&manifest).expect("serialisable");
    text.push(b'\n');
    fs::write(run_dir.join(MANIFEST), text).map_err(|e| CliError::io(&run_dir.join(MANIFEST), e))?;
    Ok(run_dir.join(SUMMARY))
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleOutcome {
    pub shap: crate::oracle::ShapBatteryReport,
    pub gradient: crate::oracle::GradientBatteryReport,
}

/// Runs both reference batteries; writes `oracle.json` under `out` when given.
pub fn cmd_oracle(seed: u64, out: Option<&Path>) -> CliResult<OracleOutcome> {
    let shap = crate::oracle::run_shap_battery(&crate::oracle::ShapBattery { seed, ..Default::default() })
        .map_err(core_error(ErrorKind::Io, "oracle"))?;
    let gradient = crate::oracle::run_gradient_battery(100, 1e-4, seed);
    let outcome = OracleOutcome { shap, gradient };
    if let Some(dir) = out {
        let mut o = Out::new(dir);
        o.json("oracle.json", &outcome)?;
    }
    Ok(outcome)
}

/// Validates the config and the dataset layout without training.
pub fn cmd_ingest(res: &Resolved) -> CliResult<Value> {
    let prepared = prepare(res)?;
    base_report(res, &prepared).map(|r| r["data"].clone())
}
