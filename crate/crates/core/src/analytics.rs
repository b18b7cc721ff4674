//! Aggregate views of attributions and forecast quality.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::attribution::{AttributionKind, AttributionTensor};
use crate::market::FeatureId;
use crate::math;
use crate::series::{Day, HourlySeries};
use crate::sshap::SshapTensor;
use crate::{Error, Result, HOURS};

/// Heatmap cells above this many price units count as important.
pub const IMPORTANCE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    MeanAbs,
    Mean,
    SingleInstance(usize),
}

/// 24×24 block for one super-variable; `values[output_hour * 24 + input_hour]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapBlock {
    pub label: String,
    pub values: Vec<f64>,
}

impl HeatmapBlock {
    #[inline]
    pub fn get(&self, output_hour: usize, input_hour: usize) -> f64 {
        self.values[output_hour * HOURS + input_hour]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapGrid {
    pub kind: AttributionKind,
    pub aggregation: Aggregation,
    pub blocks: Vec<HeatmapBlock>,
}

impl HeatmapGrid {
    pub fn cells(&self) -> impl Iterator<Item = f64> + '_ {
        self.blocks.iter().flat_map(|b| b.values.iter().copied())
    }

    pub fn block(&self, label: &str) -> Option<&HeatmapBlock> {
        self.blocks.iter().find(|b| b.label == label)
    }
}

/// One block per super-variable (in column order); the day-of-week column is left out.
pub fn heatmap(tensor: &AttributionTensor, aggregation: Aggregation) -> Result<HeatmapGrid> {
    if tensor.n_outputs != HOURS {
        return Err(Error::DimensionMismatch { expected: HOURS, got: tensor.n_outputs });
    }
    let n = tensor.n_instances();
    let selected: Vec<usize> = match aggregation {
        Aggregation::SingleInstance(i) if i < n => vec![i],
        Aggregation::SingleInstance(_) => return Err(Error::EmptyTensor),
        _ if n == 0 => return Err(Error::EmptyTensor),
        _ => (0..n).collect(),
    };
    let mut blocks: Vec<HeatmapBlock> = Vec::new();
    for (j, f) in tensor.features.iter().enumerate() {
        let FeatureId::Hourly { label, hour } = f else { continue };
        let b = match blocks.iter().position(|b| &b.label == label) {
            Some(b) => b,
            None => {
                blocks.push(HeatmapBlock { label: label.clone(), values: vec![0.0; HOURS * HOURS] });
                blocks.len() - 1
            }
        };
        for out in 0..HOURS {
            let mut acc = 0.0;
            for &i in &selected {
                let v = tensor.get(i, out, j);
                acc += match aggregation {
                    Aggregation::MeanAbs => v.abs(),
                    _ => v,
                };
            }
            blocks[b].values[out * HOURS + *hour as usize] = acc / selected.len() as f64;
        }
    }
    Ok(HeatmapGrid { kind: tensor.kind, aggregation, blocks })
}

/// Mean |SSHAP| per output hour and group, `values[hour * n_groups + group]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlyImportance {
    pub groups: Vec<String>,
    pub values: Vec<f64>,
}

impl HourlyImportance {
    pub fn get(&self, hour: usize, group: usize) -> f64 {
        self.values[hour * self.groups.len() + group]
    }
}

pub fn hourly_importance(sshap: &SshapTensor) -> Result<HourlyImportance> {
    let n = sshap.n_instances();
    if n == 0 {
        return Err(Error::EmptyTensor);
    }
    let ng = sshap.n_groups();
    let mut values = vec![0.0; sshap.n_outputs * ng];
    for i in 0..n {
        for h in 0..sshap.n_outputs {
            for g in 0..ng {
                values[h * ng + g] += sshap.get(i, h, g).abs();
            }
        }
    }
    values.iter_mut().for_each(|v| *v /= n as f64);
    Ok(HourlyImportance { groups: sshap.partition.groups.iter().map(|g| g.label.clone()).collect(), values })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeeswarmFeature {
    pub feature: FeatureId,
    pub index: usize,
    /// Mean |SHAP| over instances and output hours.
    pub score: f64,
    /// Per instance: (raw feature value, SHAP averaged over output hours).
    pub points: Vec<(f64, f64)>,
}

/// Top-`k` features by mean |SHAP|; ties keep column order.
pub fn beeswarm_table(shap: &AttributionTensor, raw_rows: &[f64], k: usize) -> Result<Vec<BeeswarmFeature>> {
    let n = shap.n_instances();
    let nf = shap.n_features();
    if raw_rows.len() != n * nf {
        return Err(Error::LengthMismatch(raw_rows.len(), n * nf));
    }
    let m = shap.n_outputs;
    let mut scores = vec![0.0; nf];
    for i in 0..n {
        for h in 0..m {
            for (j, s) in scores.iter_mut().enumerate() {
                *s += shap.get(i, h, j).abs();
            }
        }
    }
    let denom = (n * m).max(1) as f64;
    scores.iter_mut().for_each(|s| *s /= denom);
    let mut ranked: Vec<usize> = (0..nf).collect();
    ranked.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    Ok(ranked
        .into_iter()
        .take(k.max(1))
        .map(|j| BeeswarmFeature {
            feature: shap.features[j].clone(),
            index: j,
            score: scores[j],
            points: (0..n)
                .map(|i| (raw_rows[i * nf + j], (0..m).map(|h| shap.get(i, h, j)).sum::<f64>() / m as f64))
                .collect(),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformanceReport {
    pub mae: f64,
    pub rmae: f64,
    /// Fraction, not percent.
    pub smape: f64,
    pub rmse: f64,
}

pub fn performance_metrics(predicted: &[f64], actual: &[f64], naive_predicted: &[f64]) -> Result<PerformanceReport> {
    if predicted.len() != actual.len() {
        return Err(Error::LengthMismatch(predicted.len(), actual.len()));
    }
    if naive_predicted.len() != actual.len() {
        return Err(Error::LengthMismatch(naive_predicted.len(), actual.len()));
    }
    if actual.is_empty() {
        return Err(Error::EmptyData);
    }
    let n = actual.len() as f64;
    let (mut abs, mut sq, mut sm, mut naive) = (0.0, 0.0, 0.0, 0.0);
    for ((&p, &y), &z) in predicted.iter().zip(actual).zip(naive_predicted) {
        let e = p - y;
        abs += e.abs();
        sq += e * e;
        let d = p.abs() + y.abs();
        if d > 0.0 {
            sm += 2.0 * e.abs() / d;
        }
        naive += (z - y).abs();
    }
    if naive == 0.0 {
        return Err(Error::ZeroNaiveError);
    }
    Ok(PerformanceReport { mae: abs / n, rmae: abs / naive, smape: sm / n, rmse: libm::sqrt(sq / n) })
}

/// Yesterday's price at the same hour, for every complete day that has a complete predecessor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveForecast {
    pub days: Vec<Day>,
    /// `[day][hour]`
    pub predicted: Vec<f64>,
    pub actual: Vec<f64>,
}

impl NaiveForecast {
    /// Predictions for `days`, in order; `None` if any day is not covered.
    pub fn for_days(&self, days: &[Day]) -> Option<Vec<f64>> {
        let mut out = Vec::with_capacity(days.len() * HOURS);
        for d in days {
            let k = self.days.binary_search(d).ok()?;
            out.extend_from_slice(&self.predicted[k * HOURS..(k + 1) * HOURS]);
        }
        Some(out)
    }
}

pub fn naive_forecast(series: &HourlySeries) -> Result<NaiveForecast> {
    let days = series.complete_days();
    let available = (days.end - days.start).max(0) as usize;
    if available < 2 {
        return Err(Error::InsufficientHistory { needed: 2, available });
    }
    let mut out = NaiveForecast { days: Vec::new(), predicted: Vec::new(), actual: Vec::new() };
    for d in days.start + 1..days.end {
        out.days.push(Day(d));
        for h in 0..HOURS {
            out.predicted.push(series.value(crate::market::Source::Price, Day(d - 1), h).expect("covered"));
            out.actual.push(series.value(crate::market::Source::Price, Day(d), h).expect("covered"));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    /// Mean over Jacobian entries of their across-instance population std.
    pub non_linearity: f64,
    /// Mean |difference| between 4-neighbour cells within each heatmap block.
    pub non_homogeneity: f64,
    /// Heatmap cells above the threshold, divided by 24.
    pub important_vars_per_hour: f64,
}

pub fn complexity_metrics(gradients: &AttributionTensor, shap_heatmap: &HeatmapGrid, threshold: f64) -> Result<ComplexityReport> {
    let n = gradients.n_instances();
    if n < 2 {
        return Err(Error::TooFewInstances { needed: 2, got: n });
    }
    if shap_heatmap.blocks.is_empty() {
        return Err(Error::EmptyTensor);
    }
    let entries = gradients.n_outputs * gradients.n_features();
    let mut column = vec![0.0; n];
    let mut total_std = 0.0;
    for e in 0..entries {
        for (i, c) in column.iter_mut().enumerate() {
            *c = gradients.values[i * entries + e];
        }
        total_std += math::population_std(&column);
    }

    let (mut diff, mut pairs) = (0.0, 0usize);
    for block in &shap_heatmap.blocks {
        for r in 0..HOURS {
            for c in 0..HOURS {
                let v = block.get(r, c);
                if c + 1 < HOURS {
                    diff += (block.get(r, c + 1) - v).abs();
                    pairs += 1;
                }
                if r + 1 < HOURS {
                    diff += (block.get(r + 1, c) - v).abs();
                    pairs += 1;
                }
            }
        }
    }
    let important = shap_heatmap.cells().filter(|&v| v > threshold).count();
    Ok(ComplexityReport {
        non_linearity: total_std / entries as f64,
        non_homogeneity: diff / pairs as f64,
        important_vars_per_hour: important as f64 / HOURS as f64,
    })
}

/// Per-hour group contributions for one day, stacked on the baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceStack {
    pub day: Day,
    pub groups: Vec<String>,
    /// `[hour][group]`
    pub contributions: Vec<f64>,
    pub baseline: Vec<f64>,
    pub forecast: Vec<f64>,
    pub actual: Vec<f64>,
}

pub fn instance_stack(sshap: &SshapTensor, instance: usize, forecast: &[f64], actual: &[f64]) -> Result<InstanceStack> {
    if instance >= sshap.n_instances() {
        return Err(Error::EmptyTensor);
    }
    let m = sshap.n_outputs;
    if forecast.len() != m || actual.len() != m {
        return Err(Error::LengthMismatch(forecast.len().min(actual.len()), m));
    }
    let ng = sshap.n_groups();
    let block = m * ng;
    Ok(InstanceStack {
        day: sshap.instances[instance],
        groups: sshap.partition.groups.iter().map(|g| g.label.to_string()).collect(),
        contributions: sshap.values[instance * block..(instance + 1) * block].to_vec(),
        baseline: sshap.baseline[instance * m..(instance + 1) * m].to_vec(),
        forecast: forecast.to_vec(),
        actual: actual.to_vec(),
    })
}
