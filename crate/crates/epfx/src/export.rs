//! Tabular exports. Every float is written in shortest round-trip form.

use std::io::Write;

use epfx_core::analytics::{ComplexityReport, PerformanceReport};
use epfx_core::attribution::AttributionTensor;
use epfx_core::sshap::{SlopeCheck, SshapTensor};
use epfx_core::FeatureId;
use serde::Serialize;

use crate::ingest::format_day;

pub type CsvWriter<W> = csv::Writer<W>;

pub fn writer<W: Write>(w: W) -> CsvWriter<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

/// Formats a float exactly as it appears in every table and figure.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn feature_columns(f: &FeatureId) -> (String, String) {
    match f {
        FeatureId::Hourly { label, hour } => (label.clone(), hour.to_string()),
        FeatureId::DayOfWeek => (epfx_core::sshap::DAY_OF_WEEK_GROUP.to_string(), String::new()),
    }
}

/// `instance_id, output_hour, super_variable, input_hour, value`; the day-of-week column has an empty input hour.
pub fn write_attribution<W: Write>(tensor: &AttributionTensor, w: W) -> csv::Result<()> {
    let mut out = writer(w);
    out.write_record(["instance_id", "output_hour", "super_variable", "input_hour", "value"])?;
    let cols: Vec<(String, String)> = tensor.features.iter().map(feature_columns).collect();
    for (i, day) in tensor.instances.iter().enumerate() {
        let id = format_day(*day);
        for h in 0..tensor.n_outputs {
            let hour = h.to_string();
            for (j, (label, input_hour)) in cols.iter().enumerate() {
                out.write_record([id.as_str(), &hour, label, input_hour, &num(tensor.get(i, h, j))])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
pub struct BaselineSidecar {
    pub instances: Vec<String>,
    /// `[instance][output_hour]`
    pub baseline: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
}

pub fn baseline_sidecar(tensor: &AttributionTensor) -> BaselineSidecar {
    BaselineSidecar {
        instances: tensor.instances.iter().map(|d| format_day(*d)).collect(),
        baseline: (0..tensor.n_instances()).map(|i| tensor.instance_baseline(i).to_vec()).collect(),
        mean: tensor.mean_baseline(),
    }
}

/// `instance_id, output_hour, group, value`.
pub fn write_sshap<W: Write>(sshap: &SshapTensor, w: W) -> csv::Result<()> {
    let mut out = writer(w);
    out.write_record(["instance_id", "output_hour", "group", "value"])?;
    for (i, day) in sshap.instances.iter().enumerate() {
        let id = format_day(*day);
        for h in 0..sshap.n_outputs {
            let hour = h.to_string();
            for (g, group) in sshap.partition.groups.iter().enumerate() {
                out.write_record([id.as_str(), &hour, &group.label, &num(sshap.get(i, h, g))])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// One row per evaluated split.
pub fn write_performance<W: Write>(rows: &[(&str, PerformanceReport)], w: W) -> csv::Result<()> {
    let mut out = writer(w);
    out.write_record(["split", "mae", "rmae", "smape", "rmse"])?;
    for (name, r) in rows {
        out.write_record([*name, &num(r.mae), &num(r.rmae), &num(r.smape), &num(r.rmse)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_complexity<W: Write>(r: &ComplexityReport, threshold: f64, w: W) -> csv::Result<()> {
    let mut out = writer(w);
    out.write_record(["non_linearity", "non_homogeneity", "important_vars_per_hour", "threshold"])?;
    out.write_record([num(r.non_linearity), num(r.non_homogeneity), num(r.important_vars_per_hour), num(threshold)])?;
    out.flush()?;
    Ok(())
}

pub fn write_slope_checks<W: Write>(rows: &[(String, SlopeCheck, (f64, f64), f64)], w: W) -> csv::Result<()> {
    let mut out = writer(w);
    out.write_record(["partition", "fitted_slope", "intercept", "max_deviation", "points", "band_low", "band_high", "baseline"])?;
    for (name, s, band, baseline) in rows {
        out.write_record([
            name.clone(),
            num(s.fitted_slope),
            num(s.intercept),
            num(s.max_deviation),
            s.points.to_string(),
            num(band.0),
            num(band.1),
            num(*baseline),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Per-day forecasts: `instance_id, output_hour, actual, forecast, naive`.
pub fn write_forecasts<W: Write>(
    days: &[epfx_core::Day],
    actual: &[f64],
    forecast: &[f64],
    naive: &[f64],
    w: W,
) -> csv::Result<()> {
    let mut out = writer(w);
    out.write_record(["instance_id", "output_hour", "actual", "forecast", "naive"])?;
    let m = epfx_core::HOURS;
    for (i, d) in days.iter().enumerate() {
        let id = format_day(*d);
        for h in 0..m {
            let k = i * m + h;
            out.write_record([id.clone(), h.to_string(), num(actual[k]), num(forecast[k]), num(naive[k])])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_history<W: Write>(history: &[epfx_core::mlp::EpochRecord], w: W) -> csv::Result<()> {
    let mut out = writer(w);
    out.write_record(["epoch", "train_loss", "val_mae"])?;
    for r in history {
        out.write_record([r.epoch.to_string(), num(r.train_loss), num(r.val_mae)])?;
    }
    out.flush()?;
    Ok(())
}
