//! Hourly market series with DST repair.

use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::market::MarketId;
use crate::{Error, Result, HOURS};

/// Longest run of consecutive missing hours that is filled by interpolation.
pub const MAX_INTERPOLATED_GAP: i64 = 2;

/// Calendar day as a count of days since 1970-01-01.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Day(pub i32);

impl Day {
    /// Day of week with Monday = 0 (1970-01-01 was a Thursday).
    pub fn weekday(self) -> u8 {
        (self.0 + 3).rem_euclid(7) as u8
    }

    pub fn offset(self, days: i32) -> Day {
        Day(self.0 + days)
    }
}

/// One parsed CSV row before repair. `hour` counts hours since 1970-01-01T00:00 local wall time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HourlyRecord {
    pub hour: i64,
    pub price: f64,
    pub exog1: f64,
    pub exog2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlySeries {
    pub market: MarketId,
    /// First timestamp, hours since epoch; subsequent entries step by one hour.
    pub start_hour: i64,
    pub price: Vec<f64>,
    pub exog1: Vec<f64>,
    pub exog2: Vec<f64>,
}

impl HourlySeries {
    /// Sorts records, averages duplicated hours and linearly interpolates short gaps.
    pub fn from_records(market: MarketId, mut records: Vec<HourlyRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyInput);
        }
        records.sort_by_key(|r| r.hour);

        // collapse duplicates into their mean
        let mut merged: Vec<HourlyRecord> = Vec::with_capacity(records.len());
        let mut count = 0usize;
        for r in records {
            match merged.last_mut() {
                Some(last) if last.hour == r.hour => {
                    count += 1;
                    let w = 1.0 / count as f64;
                    last.price += (r.price - last.price) * w;
                    last.exog1 += (r.exog1 - last.exog1) * w;
                    last.exog2 += (r.exog2 - last.exog2) * w;
                }
                _ => {
                    merged.push(r);
                    count = 1;
                }
            }
        }

        let start_hour = merged[0].hour;
        let len = (merged[merged.len() - 1].hour - start_hour + 1) as usize;
        let mut series = HourlySeries {
            market,
            start_hour,
            price: Vec::with_capacity(len),
            exog1: Vec::with_capacity(len),
            exog2: Vec::with_capacity(len),
        };
        for pair in merged.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            series.push(a);
            let gap = b.hour - a.hour;
            if gap > 1 {
                if gap - 1 > MAX_INTERPOLATED_GAP {
                    return Err(Error::NonHourlyCadence(format!(
                        "{} consecutive hours missing after hour {}",
                        gap - 1,
                        a.hour
                    )));
                }
                for k in 1..gap {
                    let t = k as f64 / gap as f64;
                    series.push(HourlyRecord {
                        hour: a.hour + k,
                        price: a.price + (b.price - a.price) * t,
                        exog1: a.exog1 + (b.exog1 - a.exog1) * t,
                        exog2: a.exog2 + (b.exog2 - a.exog2) * t,
                    });
                }
            }
        }
        series.push(merged[merged.len() - 1]);
        series.validate()?;
        Ok(series)
    }

    fn push(&mut self, r: HourlyRecord) {
        self.price.push(r.price);
        self.exog1.push(r.exog1);
        self.exog2.push(r.exog2);
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.price.len();
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        if self.exog1.len() != n || self.exog2.len() != n {
            return Err(Error::LengthMismatch(n, self.exog1.len().min(self.exog2.len())));
        }
        for (k, v) in self.price.iter().chain(&self.exog1).chain(&self.exog2).enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteInput(k % n));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.price.len()
    }

    pub fn is_empty(&self) -> bool {
        self.price.is_empty()
    }

    pub fn hour_at(&self, index: usize) -> i64 {
        self.start_hour + index as i64
    }

    /// Value of `source` at (day, hour-of-day), if covered.
    pub fn value(&self, source: crate::market::Source, day: Day, hour: usize) -> Option<f64> {
        let t = day.0 as i64 * HOURS as i64 + hour as i64 - self.start_hour;
        if t < 0 || t as usize >= self.len() {
            return None;
        }
        let column = match source {
            crate::market::Source::Price => &self.price,
            crate::market::Source::Exog1 => &self.exog1,
            crate::market::Source::Exog2 => &self.exog2,
        };
        Some(column[t as usize])
    }

    /// Days whose 24 hours are all present, in order.
    pub fn complete_days(&self) -> core::ops::Range<i32> {
        let h = HOURS as i64;
        let first = self.start_hour.div_euclid(h) + i64::from(self.start_hour.rem_euclid(h) != 0);
        let end_hour = self.start_hour + self.len() as i64; // exclusive
        let last_excl = end_hour.div_euclid(h);
        first as i32..(last_excl.max(first)) as i32
    }

    /// Restricts the series to the whole days in `[from, to]`.
    pub fn slice_days(&self, from: Day, to: Day) -> Result<HourlySeries> {
        let days = self.complete_days();
        let lo = from.0.max(days.start);
        let hi = (to.0 + 1).min(days.end);
        if hi <= lo {
            return Err(Error::EmptyInput);
        }
        let a = (lo as i64 * HOURS as i64 - self.start_hour) as usize;
        let b = (hi as i64 * HOURS as i64 - self.start_hour) as usize;
        Ok(HourlySeries {
            market: self.market,
            start_hour: lo as i64 * HOURS as i64,
            price: self.price[a..b].to_vec(),
            exog1: self.exog1[a..b].to_vec(),
            exog2: self.exog2[a..b].to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn rec(hour: i64, p: f64) -> HourlyRecord {
        HourlyRecord { hour, price: p, exog1: 10.0 * p, exog2: -p }
    }

    #[test]
    fn weekday_of_epoch_is_thursday() {
        assert_eq!(Day(0).weekday(), 3);
        // 2015-12-07 is a Monday: 16776 days after epoch
        assert_eq!(Day(16776).weekday(), 0);
    }

    #[test]
    fn duplicated_autumn_hour_is_averaged() {
        // 48 rows, with hour 26 appearing twice
        let mut rows: Vec<_> = (0..47).map(|h| rec(h, h as f64)).collect();
        rows.insert(27, rec(26, 40.0));
        assert_eq!(rows.len(), 48);
        let s = HourlySeries::from_records(MarketId::De, rows).unwrap();
        assert_eq!(s.len(), 47);
        assert_eq!(s.price[26], 33.0);
        assert_eq!(s.exog1[26], 330.0);
    }

    #[test]
    fn missing_spring_hour_is_interpolated() {
        let rows: Vec<_> = (0..48).filter(|&h| h != 2).map(|h| rec(h, 2.0 * h as f64)).collect();
        let s = HourlySeries::from_records(MarketId::Fr, rows).unwrap();
        assert_eq!(s.len(), 48);
        assert_eq!(s.price[2], 4.0);
    }

    #[test]
    fn long_gap_is_rejected() {
        let rows: Vec<_> = (0..48).filter(|&h| !(10..20).contains(&h)).map(|h| rec(h, 1.0)).collect();
        assert!(matches!(
            HourlySeries::from_records(MarketId::Fr, rows),
            Err(Error::NonHourlyCadence(_))
        ));
    }

    #[test]
    fn unsorted_rows_are_sorted() {
        let rows = vec![rec(2, 2.0), rec(0, 0.0), rec(1, 1.0)];
        let s = HourlySeries::from_records(MarketId::Np, rows).unwrap();
        assert_eq!(s.price, vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn empty_is_error() {
        assert_eq!(HourlySeries::from_records(MarketId::Np, Vec::new()), Err(Error::EmptyInput));
    }

    #[test]
    fn complete_days_skip_partial_edges() {
        let rows: Vec<_> = (5..24 * 3 + 2).map(|h| rec(h, 0.0)).collect();
        let s = HourlySeries::from_records(MarketId::Np, rows).unwrap();
        assert_eq!(s.complete_days(), 1..3);
    }
}
