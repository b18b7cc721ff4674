//! Run configuration files.
//!
//! A run is described by one JSON document. Only `market` and `dataset` are required;
//! everything else falls back to the built-in settings for that market. Relative paths
//! are resolved against the directory holding the config file. All randomness derives
//! from the top-level `seed`.

use std::path::{Path, PathBuf};

use epfx_core::math::sub_seed;
use epfx_core::sshap::{HourSelector, Partition, DEFAULT_BANDWIDTH, DEFAULT_GRID_POINTS};
use epfx_core::{Day, MarketConfig, MarketId, ModelSpec, TrainingHyperparams, HOURS};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::ingest::{day_from_ymd, parse_day};

/// Name of the partition with one group per super-variable, always emitted.
pub const BASE_PARTITION: &str = "super_variables";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttributionSettings {
    pub n_pairs: usize,
    pub antithetic: bool,
    pub background_size: usize,
    /// Explain a seeded random subset of this many instances instead of all of them.
    pub max_instances: Option<usize>,
    pub beeswarm_top_k: usize,
}

impl Default for AttributionSettings {
    fn default() -> Self {
        AttributionSettings { n_pairs: 64, antithetic: true, background_size: 100, max_instances: None, beeswarm_top_k: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LineSettings {
    pub bandwidth: f64,
    pub grid_points: usize,
    pub mode: HourSelector,
}

impl Default for LineSettings {
    fn default() -> Self {
        LineSettings { bandwidth: DEFAULT_BANDWIDTH, grid_points: DEFAULT_GRID_POINTS, mode: HourSelector::Pooled }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MergeSpec {
    pub label: String,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub group: String,
    pub hour: u8,
}

/// A partition derived from the super-variable partition: merges first, then splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSpec {
    pub name: String,
    #[serde(default)]
    pub merges: Vec<MergeSpec>,
    #[serde(default)]
    pub splits: Vec<SplitSpec>,
}

impl PartitionSpec {
    pub fn build(&self, base: &Partition) -> epfx_core::Result<Partition> {
        let mut p = base.clone();
        for m in &self.merges {
            let members: Vec<&str> = m.members.iter().map(String::as_str).collect();
            p = p.merge(&m.label, &members)?;
        }
        for s in &self.splits {
            p = p.split_group(&s.group, s.hour)?;
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub market: MarketId,
    pub dataset: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub market_config: Option<MarketConfig>,
    /// Architecture; its `seed` is replaced by one derived from the run seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    /// Optimiser settings; `training.seed` is replaced by one derived from the run seed.
    #[serde(default)]
    pub training: TrainingHyperparams,
    #[serde(default)]
    pub attribution: AttributionSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partitions: Option<Vec<PartitionSpec>>,
    #[serde(default)]
    pub lines: LineSettings,
    #[serde(default)]
    pub instance_dates: Vec<String>,
    #[serde(default = "default_threshold")]
    pub importance_threshold: f64,
}

fn default_threshold() -> f64 {
    epfx_core::analytics::IMPORTANCE_THRESHOLD
}

/// Seeds of every random stream in a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub run: u64,
    pub init: u64,
    pub training: u64,
    pub attribution: u64,
    pub background: u64,
    pub instance_sample: u64,
}

impl Seeds {
    pub fn derive(run: u64) -> Self {
        Seeds {
            run,
            init: sub_seed(run, 1),
            training: sub_seed(run, 2),
            attribution: sub_seed(run, 3),
            background: sub_seed(run, 4),
            instance_sample: sub_seed(run, 5),
        }
    }
}

/// Strips a trailing day tag (`D`, `D-1`, ...) from a super-variable label.
pub fn core_label(label: &str) -> &str {
    match label.rsplit_once(' ') {
        Some((head, tail)) if tail == "D" || tail.strip_prefix("D-").is_some_and(|n| n.parse::<u32>().is_ok()) => head,
        _ => label,
    }
}

/// Merges super-variables that differ only in their day lag ("Price D-1" + "Price D-2" → "Price").
pub fn core_merges(config: &MarketConfig) -> Vec<MergeSpec> {
    let mut merges: Vec<MergeSpec> = Vec::new();
    for label in config.block_labels() {
        let core = core_label(label);
        match merges.iter_mut().find(|m| m.label == core) {
            Some(m) => m.members.push(label.to_string()),
            None => merges.push(MergeSpec { label: core.to_string(), members: vec![label.to_string()] }),
        }
    }
    merges
}

/// Hour-range splits of the load forecast used for the markets where its gradients change sign.
pub fn default_splits(market: MarketId) -> Vec<SplitSpec> {
    let split = |group: &str, hour| vec![SplitSpec { group: group.to_string(), hour }];
    match market {
        MarketId::Fr => split("Load Forecast D", 5),
        MarketId::Be => split("French Load Forecast D", 5),
        MarketId::Pjm => split("PJM Load Forecast D", 6),
        MarketId::De | MarketId::Np => Vec::new(),
    }
}

pub fn default_partitions(market: MarketId, config: &MarketConfig) -> Vec<PartitionSpec> {
    let mut out = vec![PartitionSpec { name: "core".into(), merges: core_merges(config), splits: Vec::new() }];
    let splits = default_splits(market);
    if !splits.is_empty() && splits.iter().all(|s| config.block_labels().contains(&s.group.as_str())) {
        out.push(PartitionSpec { name: "split".into(), merges: Vec::new(), splits });
    }
    out
}

/// A validated config with paths resolved and defaults filled in.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub raw: RunConfig,
    pub config_path: Option<PathBuf>,
    pub dataset: PathBuf,
    pub output_dir: PathBuf,
    pub window: (Day, Day),
    pub market_config: MarketConfig,
    pub model: ModelSpec,
    pub training: TrainingHyperparams,
    pub partitions: Vec<PartitionSpec>,
    pub instance_days: Vec<Day>,
    pub seeds: Seeds,
    pub threads: usize,
}

impl Resolved {
    /// Config echo that re-validates from any working directory.
    pub fn echo(&self) -> RunConfig {
        let mut echo = self.raw.clone();
        echo.dataset = self.dataset.clone();
        echo.output_dir = Some(self.output_dir.clone());
        echo.threads = Some(self.threads);
        echo.market_config = Some(self.market_config.clone());
        echo.model = Some(self.model.clone());
        echo.training = self.training.clone();
        echo.partitions = Some(self.partitions.clone());
        echo
    }
}

/// Command-line and environment overrides.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

pub fn read_config(path: &Path) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn resolve_path(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn parse_date_field(name: &str, text: &str) -> CliResult<Day> {
    parse_day(text).ok_or_else(|| CliError::config(format!("{name}: {text:?} is not a YYYY-MM-DD date")))
}

fn check(cond: bool, message: impl FnOnce() -> String) -> CliResult<()> {
    if cond {
        Ok(())
    } else {
        Err(CliError::config(message()))
    }
}

/// Validates `raw`, resolving relative paths against `base_dir`.
pub fn resolve(raw: RunConfig, base_dir: &Path, config_path: Option<PathBuf>, overrides: &Overrides) -> CliResult<Resolved> {
    let mut raw = raw;
    if let Some(seed) = overrides.seed {
        raw.seed = seed;
    }
    let seeds = Seeds::derive(raw.seed);

    let market_config = raw.market_config.clone().unwrap_or_else(|| MarketConfig::builtin(raw.market));
    market_config.validate().map_err(|e| CliError::config(format!("market_config: {e}")))?;

    let mut model = raw.model.clone().unwrap_or_else(|| ModelSpec::builtin(raw.market, 0));
    model.seed = seeds.init;
    model.validate().map_err(|e| CliError::config(format!("model: {e}")))?;
    check(model.n_inputs() == market_config.feature_count(), || {
        format!("model expects {} inputs but the market config yields {}", model.n_inputs(), market_config.feature_count())
    })?;
    check(model.n_outputs() == HOURS, || format!("model must have {HOURS} outputs, has {}", model.n_outputs()))?;

    let mut training = raw.training.clone();
    training.seed = seeds.training;
    training.validate().map_err(|e| CliError::config(format!("training: {e}")))?;

    let a = &raw.attribution;
    check(a.n_pairs >= 1, || "attribution.n_pairs must be >= 1".into())?;
    check(a.background_size >= 1, || "attribution.background_size must be >= 1".into())?;
    check(a.beeswarm_top_k >= 1, || "attribution.beeswarm_top_k must be >= 1".into())?;
    check(a.max_instances != Some(0), || "attribution.max_instances must be >= 1".into())?;
    let l = &raw.lines;
    check(l.bandwidth.is_finite() && l.bandwidth > 0.0, || "lines.bandwidth must be > 0".into())?;
    check(l.grid_points >= 2, || "lines.grid_points must be >= 2".into())?;
    if let HourSelector::Hour(h) = l.mode {
        check((h as usize) < HOURS, || format!("lines.mode hour {h} out of range"))?;
    }
    check(raw.importance_threshold.is_finite() && raw.importance_threshold >= 0.0, || {
        "importance_threshold must be >= 0".into()
    })?;

    let threads = overrides.threads.or(raw.threads).unwrap_or(1);
    check(threads >= 1, || "threads must be >= 1".into())?;

    let (default_start, default_end) = raw.market.training_window();
    let start = match &raw.start {
        Some(s) => parse_date_field("start", s)?,
        None => day_from_ymd(default_start),
    };
    let end = match &raw.end {
        Some(s) => parse_date_field("end", s)?,
        None => day_from_ymd(default_end),
    };
    check(start <= end, || "start must not be after end".into())?;

    let instance_days = raw
        .instance_dates
        .iter()
        .map(|d| parse_date_field("instance_dates", d))
        .collect::<CliResult<Vec<_>>>()?;

    let partitions = raw.partitions.clone().unwrap_or_else(|| default_partitions(raw.market, &market_config));
    let base = Partition::by_super_variable(&market_config.feature_ids())
        .map_err(|e| CliError::config(format!("partition: {e}")))?;
    for (k, p) in partitions.iter().enumerate() {
        check(!p.name.is_empty() && p.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-'), || {
            format!("partition name {:?} must be non-empty and use only [A-Za-z0-9_-]", p.name)
        })?;
        check(p.name != BASE_PARTITION && partitions[..k].iter().all(|o| o.name != p.name), || {
            format!("duplicate partition name {:?}", p.name)
        })?;
        p.build(&base).map_err(|e| CliError::config(format!("partition {:?}: {e}", p.name)))?;
    }

    let dataset = resolve_path(base_dir, &raw.dataset);
    if !dataset.is_file() {
        return Err(CliError::data(format!("dataset not found: {}", dataset.display())));
    }
    let output_dir = match &overrides.out {
        Some(o) => o.clone(),
        None => raw.output_dir.as_ref().map_or_else(|| base_dir.join("out"), |o| resolve_path(base_dir, o)),
    };

    Ok(Resolved {
        raw,
        config_path,
        dataset,
        output_dir,
        window: (start, end),
        market_config,
        model,
        training,
        partitions,
        instance_days,
        seeds,
        threads,
    })
}

/// Reads, validates and resolves the config at `path`.
pub fn load(path: &Path, overrides: &Overrides) -> CliResult<Resolved> {
    let raw = read_config(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let base = if base.as_os_str().is_empty() { PathBuf::from(".") } else { base };
    resolve(raw, &base, Some(path.to_path_buf()), overrides)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn core_labels_strip_day_tags() {
        assert_eq!(core_label("Price D-1"), "Price");
        assert_eq!(core_label("Load Forecast D"), "Load Forecast");
        assert_eq!(core_label("French Load Forecast D-7"), "French Load Forecast");
        assert_eq!(core_label("Day of week"), "Day of week");
        assert_eq!(core_label("Price D-x"), "Price D-x");
    }

    #[test]
    fn builtin_partitions_are_valid() {
        for m in [MarketId::De, MarketId::Fr, MarketId::Be, MarketId::Np, MarketId::Pjm] {
            let mc = MarketConfig::builtin(m);
            let base = Partition::by_super_variable(&mc.feature_ids()).unwrap();
            let specs = default_partitions(m, &mc);
            assert_eq!(specs.len(), if matches!(m, MarketId::De | MarketId::Np) { 1 } else { 2 });
            for s in specs {
                s.build(&base).unwrap();
            }
        }
    }

    #[test]
    fn np_core_groups() {
        let mc = MarketConfig::builtin(MarketId::Np);
        let labels: Vec<String> = core_merges(&mc).into_iter().map(|m| m.label).collect();
        assert_eq!(labels, ["Price", "Load Forecast", "Wind Generation Forecast"]);
    }
}
