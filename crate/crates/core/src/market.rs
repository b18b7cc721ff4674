//! Market identities and feature layouts.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, HOURS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MarketId {
    #[serde(rename = "DE")]
    De,
    #[serde(rename = "FR")]
    Fr,
    #[serde(rename = "BE")]
    Be,
    #[serde(rename = "NP")]
    Np,
    #[serde(rename = "PJM")]
    Pjm,
}

impl MarketId {
    pub const ALL: [MarketId; 5] = [MarketId::De, MarketId::Fr, MarketId::Be, MarketId::Np, MarketId::Pjm];

    pub fn code(self) -> &'static str {
        match self {
            MarketId::De => "DE",
            MarketId::Fr => "FR",
            MarketId::Be => "BE",
            MarketId::Np => "NP",
            MarketId::Pjm => "PJM",
        }
    }

    pub fn parse(code: &str) -> Option<MarketId> {
        MarketId::ALL.into_iter().find(|m| m.code().eq_ignore_ascii_case(code))
    }

    pub fn currency(self) -> &'static str {
        match self {
            MarketId::Pjm => "$/MWh",
            _ => "EUR/MWh",
        }
    }

    /// Training window as (year, month, day) bounds, inclusive.
    pub fn training_window(self) -> ((i32, u32, u32), (i32, u32, u32)) {
        match self {
            MarketId::Np | MarketId::Pjm => ((2013, 1, 1), (2016, 12, 31)),
            _ => ((2012, 9, 5), (2016, 9, 4)),
        }
    }
}

impl fmt::Display for MarketId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Which column of the market CSV a super-variable reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Price,
    Exog1,
    Exog2,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SuperVariable {
    pub source: Source,
    pub day_lag: u32,
    pub label: String,
}

impl SuperVariable {
    pub fn new(source: Source, day_lag: u32, label: &str) -> Self {
        SuperVariable { source, day_lag, label: label.to_string() }
    }
}

/// Identity of one model input.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureId {
    Hourly { label: String, hour: u8 },
    DayOfWeek,
}

impl FeatureId {
    pub fn hourly(label: &str, hour: u8) -> Self {
        FeatureId::Hourly { label: label.to_string(), hour }
    }

    pub fn super_variable(&self) -> Option<&str> {
        match self {
            FeatureId::Hourly { label, .. } => Some(label),
            FeatureId::DayOfWeek => None,
        }
    }

    pub fn hour(&self) -> Option<u8> {
        match self {
            FeatureId::Hourly { hour, .. } => Some(*hour),
            FeatureId::DayOfWeek => None,
        }
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureId::Hourly { label, hour } => write!(f, "{label} H{hour}"),
            FeatureId::DayOfWeek => f.write_str("Day of week"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketConfig {
    pub super_variables: Vec<SuperVariable>,
    #[serde(default)]
    pub include_day_of_week: bool,
    pub currency: String,
}

impl MarketConfig {
    pub fn validate(&self) -> Result<()> {
        if self.super_variables.is_empty() {
            return Err(Error::InvalidArgument("market config has no super-variables".to_string()));
        }
        for (k, sv) in self.super_variables.iter().enumerate() {
            if sv.label.is_empty() {
                return Err(Error::InvalidArgument("empty super-variable label".to_string()));
            }
            if self.super_variables[..k].iter().any(|o| o.label == sv.label) {
                return Err(Error::InvalidArgument(alloc::format!("duplicate super-variable `{}`", sv.label)));
            }
        }
        Ok(())
    }

    pub fn feature_count(&self) -> usize {
        HOURS * self.super_variables.len() + usize::from(self.include_day_of_week)
    }

    pub fn max_lag(&self) -> u32 {
        self.super_variables.iter().map(|s| s.day_lag).max().unwrap_or(0)
    }

    /// Column labels: super-variable blocks of 24 hours in order, then the day-of-week column.
    pub fn feature_ids(&self) -> Vec<FeatureId> {
        let mut ids = Vec::with_capacity(self.feature_count());
        for sv in &self.super_variables {
            for h in 0..HOURS as u8 {
                ids.push(FeatureId::hourly(&sv.label, h));
            }
        }
        if self.include_day_of_week {
            ids.push(FeatureId::DayOfWeek);
        }
        ids
    }

    pub fn block_labels(&self) -> Vec<&str> {
        self.super_variables.iter().map(|s| s.label.as_str()).collect()
    }

    /// Built-in layout for each benchmark market.
    pub fn builtin(market: MarketId) -> MarketConfig {
        use Source::*;
        let sv = SuperVariable::new;
        let (super_variables, include_day_of_week) = match market {
            MarketId::De => (
                alloc::vec![
                    sv(Price, 1, "Price D-1"),
                    sv(Price, 2, "Price D-2"),
                    sv(Price, 3, "Price D-3"),
                    sv(Price, 7, "Price D-7"),
                    sv(Exog1, 0, "Load Forecast D"),
                    sv(Exog1, 1, "Load Forecast D-1"),
                    sv(Exog1, 7, "Load Forecast D-7"),
                    sv(Exog2, 0, "Renewable Forecast D"),
                    sv(Exog2, 1, "Renewable Forecast D-1"),
                ],
                true,
            ),
            MarketId::Fr => (
                alloc::vec![
                    sv(Price, 1, "Price D-1"),
                    sv(Price, 3, "Price D-3"),
                    sv(Exog1, 0, "Load Forecast D"),
                    sv(Exog2, 0, "Generation Forecast D"),
                    sv(Exog2, 1, "Generation Forecast D-1"),
                ],
                false,
            ),
            MarketId::Be => (
                alloc::vec![
                    sv(Price, 1, "Price D-1"),
                    sv(Exog1, 0, "French Load Forecast D"),
                    sv(Exog1, 7, "French Load Forecast D-7"),
                    sv(Exog2, 0, "French Generation Forecast D"),
                    sv(Exog2, 1, "French Generation Forecast D-1"),
                ],
                true,
            ),
            MarketId::Np => (
                alloc::vec![
                    sv(Price, 1, "Price D-1"),
                    sv(Price, 2, "Price D-2"),
                    sv(Exog1, 0, "Load Forecast D"),
                    sv(Exog1, 1, "Load Forecast D-1"),
                    sv(Exog2, 0, "Wind Generation Forecast D"),
                    sv(Exog2, 1, "Wind Generation Forecast D-1"),
                ],
                false,
            ),
            MarketId::Pjm => (
                alloc::vec![
                    sv(Price, 1, "Price D-1"),
                    sv(Exog1, 0, "PJM Load Forecast D"),
                    sv(Exog1, 1, "PJM Load Forecast D-1"),
                    sv(Exog2, 0, "ComEd Load Forecast D"),
                    sv(Exog2, 1, "ComEd Load Forecast D-1"),
                ],
                false,
            ),
        };
        MarketConfig { super_variables, include_day_of_week, currency: market.currency().to_string() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_feature_counts_match_input_layers() {
        let expected = [(MarketId::De, 217), (MarketId::Fr, 120), (MarketId::Be, 121), (MarketId::Np, 144), (MarketId::Pjm, 120)];
        for (m, n) in expected {
            let cfg = MarketConfig::builtin(m);
            cfg.validate().unwrap();
            assert_eq!(cfg.feature_count(), n, "{m}");
            assert_eq!(cfg.feature_ids().len(), n);
        }
    }

    #[test]
    fn market_codes_roundtrip() {
        for m in MarketId::ALL {
            assert_eq!(MarketId::parse(m.code()), Some(m));
        }
        assert_eq!(MarketId::parse("pjm"), Some(MarketId::Pjm));
        assert_eq!(MarketId::parse("XX"), None);
    }

    #[test]
    fn duplicate_labels_rejected() {
        let mut cfg = MarketConfig::builtin(MarketId::Fr);
        cfg.super_variables[1].label = "Price D-1".into();
        assert!(cfg.validate().is_err());
    }
}
