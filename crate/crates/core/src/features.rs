//! Lagged daily feature matrices.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::market::{FeatureId, MarketConfig};
use crate::series::{Day, HourlySeries};
use crate::{Error, Result, HOURS};

/// Row-major instances × features, plus the 24 target prices of each instance day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub instances: Vec<Day>,
    pub columns: Vec<FeatureId>,
    pub values: Vec<f64>,
    pub targets: Vec<f64>,
}

impl FeatureMatrix {
    pub fn n_instances(&self) -> usize {
        self.instances.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n_features();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn target(&self, i: usize) -> &[f64] {
        &self.targets[i * HOURS..(i + 1) * HOURS]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_features().max(1))
    }

    pub fn position(&self, day: Day) -> Option<usize> {
        self.instances.binary_search(&day).ok()
    }

    /// Sub-matrix of the given instance positions, in the given order.
    pub fn select(&self, positions: &[usize]) -> FeatureMatrix {
        let mut out = FeatureMatrix {
            instances: Vec::with_capacity(positions.len()),
            columns: self.columns.clone(),
            values: Vec::with_capacity(positions.len() * self.n_features()),
            targets: Vec::with_capacity(positions.len() * HOURS),
        };
        for &p in positions {
            out.instances.push(self.instances[p]);
            out.values.extend_from_slice(self.row(p));
            out.targets.extend_from_slice(self.target(p));
        }
        out
    }
}

/// One row per target day D: feature (label, h) is the source value at hour h of D − lag.
pub fn build_feature_matrix(series: &HourlySeries, config: &MarketConfig) -> Result<FeatureMatrix> {
    config.validate()?;
    let days = series.complete_days();
    let available = (days.end - days.start).max(0) as usize;
    let max_lag = config.max_lag() as usize;
    if available < max_lag + 1 {
        return Err(Error::InsufficientHistory { needed: max_lag + 1, available });
    }
    let columns = config.feature_ids();
    let n_features = columns.len();
    let first = days.start + max_lag as i32;
    let n = (days.end - first) as usize;

    let mut m = FeatureMatrix {
        instances: Vec::with_capacity(n),
        columns,
        values: Vec::with_capacity(n * n_features),
        targets: Vec::with_capacity(n * HOURS),
    };
    let base = series.start_hour;
    let column_of = |s: crate::market::Source| match s {
        crate::market::Source::Price => &series.price,
        crate::market::Source::Exog1 => &series.exog1,
        crate::market::Source::Exog2 => &series.exog2,
    };
    for d in first..days.end {
        let day = Day(d);
        m.instances.push(day);
        for sv in &config.super_variables {
            let start = ((d - sv.day_lag as i32) as i64 * HOURS as i64 - base) as usize;
            m.values.extend_from_slice(&column_of(sv.source)[start..start + HOURS]);
        }
        if config.include_day_of_week {
            m.values.push(f64::from(day.weekday()));
        }
        let start = (d as i64 * HOURS as i64 - base) as usize;
        m.targets.extend_from_slice(&series.price[start..start + HOURS]);
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{MarketId, Source, SuperVariable};
    use crate::series::HourlyRecord;
    use alloc::vec;

    fn synthetic(days: i64, start_day: i64) -> HourlySeries {
        let recs = (0..days * 24)
            .map(|k| {
                let hour = start_day * 24 + k;
                HourlyRecord { hour, price: hour as f64, exog1: 1e6 + hour as f64, exog2: -(hour as f64) }
            })
            .collect();
        HourlySeries::from_records(MarketId::Fr, recs).unwrap()
    }

    #[test]
    fn fr_and_np_layout_sizes() {
        let s = synthetic(20, 15000);
        let fr = build_feature_matrix(&s, &MarketConfig::builtin(MarketId::Fr)).unwrap();
        assert_eq!(fr.n_features(), 120);
        assert_eq!(fr.n_instances(), 17);
        let np = build_feature_matrix(&s, &MarketConfig::builtin(MarketId::Np)).unwrap();
        assert_eq!(np.n_features(), 144);
    }

    #[test]
    fn first_instance_is_offset_by_max_lag() {
        // 2013-01-01 is day 15706
        let s = synthetic(30, 15706);
        let cfg = MarketConfig {
            super_variables: vec![SuperVariable::new(Source::Price, 7, "Price D-7")],
            include_day_of_week: false,
            currency: "EUR/MWh".into(),
        };
        let m = build_feature_matrix(&s, &cfg).unwrap();
        assert_eq!(m.instances[0], Day(15713)); // 2013-01-08
    }

    #[test]
    fn values_match_brute_force_lookup() {
        let s = synthetic(12, 16000);
        let cfg = MarketConfig::builtin(MarketId::De);
        let m = build_feature_matrix(&s, &cfg).unwrap();
        for (i, &day) in m.instances.iter().enumerate() {
            for (j, id) in m.columns.iter().enumerate() {
                let expected = match id {
                    FeatureId::Hourly { label, hour } => {
                        let sv = cfg.super_variables.iter().find(|s| &s.label == label).unwrap();
                        s.value(sv.source, day.offset(-(sv.day_lag as i32)), *hour as usize).unwrap()
                    }
                    FeatureId::DayOfWeek => f64::from(day.weekday()),
                };
                assert_eq!(m.row(i)[j], expected);
            }
            for h in 0..HOURS {
                assert_eq!(m.target(i)[h], s.value(Source::Price, day, h).unwrap());
            }
        }
    }

    #[test]
    fn insufficient_history() {
        let s = synthetic(7, 16000);
        let err = build_feature_matrix(&s, &MarketConfig::builtin(MarketId::De)).unwrap_err();
        assert_eq!(err, Error::InsufficientHistory { needed: 8, available: 7 });
    }

    #[test]
    fn deterministic() {
        let s = synthetic(15, 16000);
        let cfg = MarketConfig::builtin(MarketId::Be);
        let a = build_feature_matrix(&s, &cfg).unwrap();
        let b = build_feature_matrix(&s, &cfg).unwrap();
        assert!(a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
