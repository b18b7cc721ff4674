//! Super-variable SHAP (SSHAP) values and lines.
//!
//! A partition groups model inputs into disjoint, exhaustive super-variables. The SSHAP
//! value of a group is the sum of its members' SHAP values, so group values still add up
//! to `m(x) − E(m(X))`. SSHAP lines smooth a group's values against the actual price with
//! a Gaussian Nadaraya–Watson estimator; their sum should track `price − E(m(X))`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::attribution::{AttributionKind, AttributionTensor};
use crate::market::FeatureId;
use crate::math;
use crate::series::Day;
use crate::{Error, Result, HOURS};

pub const DEFAULT_BANDWIDTH: f64 = 5.0;
pub const DEFAULT_GRID_POINTS: usize = 200;
/// Grid spans these percentiles of the actual prices.
pub const GRID_PERCENTILES: (f64, f64) = (1.0, 99.0);
/// The slope fit uses grid points inside these percentiles.
pub const SLOPE_BAND_PERCENTILES: (f64, f64) = (5.0, 95.0);

pub const DAY_OF_WEEK_GROUP: &str = "Day of week";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub label: String,
    /// Feature indices, ascending.
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub features: Vec<FeatureId>,
    pub groups: Vec<Group>,
}

impl Partition {
    /// Checks that groups are disjoint, cover every feature and have unique labels.
    pub fn new(features: Vec<FeatureId>, mut groups: Vec<Group>) -> Result<Self> {
        let mut owner = vec![usize::MAX; features.len()];
        for (g, group) in groups.iter_mut().enumerate() {
            if group.members.is_empty() {
                return Err(Error::PartitionMismatch(format!("group `{}` is empty", group.label)));
            }
            group.members.sort_unstable();
            for &i in &group.members {
                if i >= features.len() {
                    return Err(Error::PartitionMismatch(format!("feature index {i} out of range")));
                }
                if owner[i] != usize::MAX {
                    return Err(Error::PartitionMismatch(format!("feature `{}` is in two groups", features[i])));
                }
                owner[i] = g;
            }
        }
        if let Some(i) = owner.iter().position(|&o| o == usize::MAX) {
            return Err(Error::PartitionMismatch(format!("feature `{}` is in no group", features[i])));
        }
        for (k, g) in groups.iter().enumerate() {
            if groups[..k].iter().any(|o| o.label == g.label) {
                return Err(Error::PartitionMismatch(format!("duplicate group label `{}`", g.label)));
            }
        }
        Ok(Partition { features, groups })
    }

    /// One group per super-variable, in first-appearance order, plus a day-of-week group if present.
    pub fn by_super_variable(features: &[FeatureId]) -> Result<Self> {
        let mut groups: Vec<Group> = Vec::new();
        for (i, f) in features.iter().enumerate() {
            let label = f.super_variable().unwrap_or(DAY_OF_WEEK_GROUP);
            match groups.iter_mut().find(|g| g.label == label) {
                Some(g) => g.members.push(i),
                None => groups.push(Group { label: label.to_string(), members: vec![i] }),
            }
        }
        Partition::new(features.to_vec(), groups)
    }

    /// Every feature in its own group, labelled by its feature id.
    pub fn singletons(features: &[FeatureId]) -> Result<Self> {
        let groups = features.iter().enumerate().map(|(i, f)| Group { label: f.to_string(), members: vec![i] }).collect();
        Partition::new(features.to_vec(), groups)
    }

    pub fn group(&self, label: &str) -> Option<&Group> {
        self.groups.iter().find(|g| g.label == label)
    }

    pub fn labels(&self) -> Vec<&str> {
        self.groups.iter().map(|g| g.label.as_str()).collect()
    }

    /// Replaces the listed groups by their union, placed where the first of them was.
    pub fn merge(&self, label: &str, members: &[&str]) -> Result<Partition> {
        if members.is_empty() {
            return Err(Error::PartitionMismatch(format!("merge `{label}` lists no groups")));
        }
        for m in members {
            if self.group(m).is_none() {
                return Err(Error::UnknownGroup(m.to_string()));
            }
        }
        let mut groups = Vec::with_capacity(self.groups.len());
        let mut merged: Option<usize> = None;
        for g in &self.groups {
            if members.contains(&g.label.as_str()) {
                match merged {
                    Some(at) => {
                        let at_group: &mut Group = &mut groups[at];
                        at_group.members.extend_from_slice(&g.members);
                    }
                    None => {
                        merged = Some(groups.len());
                        groups.push(Group { label: label.to_string(), members: g.members.clone() });
                    }
                }
            } else {
                groups.push(g.clone());
            }
        }
        Partition::new(self.features.clone(), groups)
    }

    /// Splits a 24-hour super-variable group at `split_hour` into `H0-H(s−1)` and `H(s)-H23`.
    pub fn split_group(&self, label: &str, split_hour: u8) -> Result<Partition> {
        let g = self.groups.iter().position(|g| g.label == label).ok_or_else(|| Error::UnknownGroup(label.to_string()))?;
        if !(1..HOURS as u8).contains(&split_hour) {
            return Err(Error::InvalidArgument(format!("split hour {split_hour} outside 1..=23")));
        }
        let group = &self.groups[g];
        let sv = self.features[group.members[0]].super_variable().map(str::to_string);
        let hourly = group.members.len() == HOURS
            && sv.is_some()
            && group.members.iter().all(|&i| self.features[i].super_variable() == sv.as_deref())
            && {
                let mut hours: Vec<u8> = group.members.iter().filter_map(|&i| self.features[i].hour()).collect();
                hours.sort_unstable();
                hours.iter().copied().eq(0..HOURS as u8)
            };
        if !hourly {
            return Err(Error::NotHourlyGroup(label.to_string()));
        }
        let (early, late): (Vec<usize>, Vec<usize>) =
            group.members.iter().partition(|&&i| self.features[i].hour().unwrap_or(0) < split_hour);
        let mut groups = self.groups.clone();
        groups.splice(
            g..=g,
            [
                Group { label: format!("{label} H0-H{}", split_hour - 1), members: early },
                Group { label: format!("{label} H{split_hour}-H23"), members: late },
            ],
        );
        Partition::new(self.features.clone(), groups)
    }
}

/// Values laid out `[instance][output][group]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SshapTensor {
    pub instances: Vec<Day>,
    pub partition: Partition,
    pub n_outputs: usize,
    pub values: Vec<f64>,
    /// `[instance][output]`
    pub baseline: Vec<f64>,
}

impl SshapTensor {
    pub fn n_instances(&self) -> usize {
        self.instances.len()
    }

    pub fn n_groups(&self) -> usize {
        self.partition.groups.len()
    }

    #[inline]
    pub fn get(&self, instance: usize, output: usize, group: usize) -> f64 {
        self.values[(instance * self.n_outputs + output) * self.n_groups() + group]
    }

    pub fn group_index(&self, label: &str) -> Option<usize> {
        self.partition.groups.iter().position(|g| g.label == label)
    }

    /// Per-output baseline averaged over instances.
    pub fn mean_baseline(&self) -> Vec<f64> {
        let n = self.n_instances().max(1) as f64;
        let mut out = vec![0.0; self.n_outputs];
        for chunk in self.baseline.chunks_exact(self.n_outputs.max(1)) {
            for (o, b) in out.iter_mut().zip(chunk) {
                *o += b / n;
            }
        }
        out
    }
}

/// Sums SHAP values over each group of `partition`.
pub fn aggregate(shap: &AttributionTensor, partition: &Partition) -> Result<SshapTensor> {
    if shap.kind != AttributionKind::Shap && !shap.baseline.is_empty() {
        return Err(Error::InvalidArgument("baseline present on a gradient tensor".into()));
    }
    if shap.features != partition.features {
        return Err(Error::PartitionMismatch("partition features differ from tensor features".into()));
    }
    let nf = shap.n_features();
    let ng = partition.groups.len();
    let rows = shap.n_instances() * shap.n_outputs;
    let mut values = Vec::with_capacity(rows * ng);
    for r in 0..rows {
        let row = &shap.values[r * nf..(r + 1) * nf];
        for g in &partition.groups {
            values.push(g.members.iter().map(|&i| row[i]).sum());
        }
    }
    Ok(SshapTensor {
        instances: shap.instances.clone(),
        partition: partition.clone(),
        n_outputs: shap.n_outputs,
        values,
        baseline: shap.baseline.clone(),
    })
}

/// How SSHAP observations are formed from the `[instance][hour]` layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HourSelector {
    /// One observation per (instance, output hour).
    Pooled,
    /// One observation per instance: daily mean price and daily mean SSHAP.
    DailyMean,
    /// Only the given output hour.
    Hour(u8),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SshapLine {
    pub group: String,
    pub grid: Vec<f64>,
    /// `None` where no observation carries kernel weight.
    pub curve: Vec<Option<f64>>,
    pub bandwidth: f64,
}

/// (price, value) observations of one group, per `selector`.
pub fn observations(
    sshap: &SshapTensor,
    group: usize,
    selector: HourSelector,
    actual_prices: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = sshap.n_outputs;
    if actual_prices.len() != sshap.n_instances() * m {
        return Err(Error::LengthMismatch(actual_prices.len(), sshap.n_instances() * m));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..sshap.n_instances() {
        let prices = &actual_prices[i * m..(i + 1) * m];
        match selector {
            HourSelector::Pooled => {
                for (h, &p) in prices.iter().enumerate() {
                    xs.push(p);
                    ys.push(sshap.get(i, h, group));
                }
            }
            HourSelector::DailyMean => {
                xs.push(math::mean(prices));
                ys.push((0..m).map(|h| sshap.get(i, h, group)).sum::<f64>() / m as f64);
            }
            HourSelector::Hour(h) => {
                let h = h as usize;
                if h >= m {
                    return Err(Error::InvalidArgument(format!("output hour {h} out of range")));
                }
                xs.push(prices[h]);
                ys.push(sshap.get(i, h, group));
            }
        }
    }
    Ok((xs, ys))
}

/// Gaussian Nadaraya–Watson smoother of `values` against `prices`, evaluated on `grid`.
pub fn kernel_smooth(prices: &[f64], values: &[f64], grid: &[f64], bandwidth: f64) -> Result<Vec<Option<f64>>> {
    if prices.is_empty() {
        return Err(Error::EmptyData);
    }
    if prices.len() != values.len() {
        return Err(Error::LengthMismatch(prices.len(), values.len()));
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidArgument(format!("bandwidth {bandwidth} must be > 0")));
    }
    let inv = 1.0 / bandwidth;
    Ok(grid
        .iter()
        .map(|&g| {
            let (mut num, mut den) = (0.0, 0.0);
            for (&p, &v) in prices.iter().zip(values) {
                let u = (g - p) * inv;
                let w = libm::exp(-0.5 * u * u);
                num += w * v;
                den += w;
            }
            (den > 0.0).then(|| num / den)
        })
        .collect())
}

/// Evenly spaced grid between two percentiles of `prices`.
pub fn price_grid(prices: &[f64], n_points: usize, percentiles: (f64, f64)) -> Result<Vec<f64>> {
    if prices.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut sorted = prices.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = math::percentile_sorted(&sorted, percentiles.0);
    let hi = math::percentile_sorted(&sorted, percentiles.1);
    if hi.is_nan() || lo.is_nan() || hi <= lo {
        return Err(Error::InvalidArgument("price range is degenerate".into()));
    }
    Ok(math::linspace(lo, hi, n_points))
}

pub fn sshap_line(
    sshap: &SshapTensor,
    group: &str,
    selector: HourSelector,
    actual_prices: &[f64],
    bandwidth: f64,
    grid: &[f64],
) -> Result<SshapLine> {
    let g = sshap.group_index(group).ok_or_else(|| Error::UnknownGroup(group.to_string()))?;
    let (xs, ys) = observations(sshap, g, selector, actual_prices)?;
    Ok(SshapLine { group: group.to_string(), grid: grid.to_vec(), curve: kernel_smooth(&xs, &ys, grid, bandwidth)?, bandwidth })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeCheck {
    pub fitted_slope: f64,
    pub intercept: f64,
    /// `max |S(g) − (g − baseline)|` over the band.
    pub max_deviation: f64,
    pub points: usize,
}

/// Fits a least-squares line to the summed SSHAP lines over grid points inside `band`
/// and measures the distance from `g − baseline`.
pub fn slope_check(lines: &[SshapLine], baseline: f64, band: (f64, f64)) -> Result<SlopeCheck> {
    let first = lines.first().ok_or(Error::EmptyData)?;
    if lines.iter().any(|l| l.grid.len() != first.grid.len() || l.grid.iter().zip(&first.grid).any(|(a, b)| a.to_bits() != b.to_bits())) {
        return Err(Error::GridMismatch);
    }
    let mut xs = Vec::new();
    let mut ss = Vec::new();
    for (k, &g) in first.grid.iter().enumerate() {
        if g < band.0 || g > band.1 {
            continue;
        }
        let total: Option<f64> = lines.iter().map(|l| l.curve[k]).sum();
        if let Some(s) = total {
            xs.push(g);
            ss.push(s);
        }
    }
    if xs.len() < 2 {
        return Err(Error::EmptyData);
    }
    let mx = math::mean(&xs);
    let ms = math::mean(&ss);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, s) in xs.iter().zip(&ss) {
        sxy += (x - mx) * (s - ms);
        sxx += (x - mx) * (x - mx);
    }
    let slope = sxy / sxx;
    let max_deviation = xs.iter().zip(&ss).map(|(x, s)| (s - (x - baseline)).abs()).fold(0.0, f64::max);
    Ok(SlopeCheck { fitted_slope: slope, intercept: ms - slope * mx, max_deviation, points: xs.len() })
}

/// Percentile band used for the slope fit.
pub fn slope_band(prices: &[f64]) -> (f64, f64) {
    let mut sorted = prices.to_vec();
    sorted.sort_by(f64::total_cmp);
    (
        math::percentile_sorted(&sorted, SLOPE_BAND_PERCENTILES.0),
        math::percentile_sorted(&sorted, SLOPE_BAND_PERCENTILES.1),
    )
}
