//! Market CSV parsing and calendar helpers.
//!
//! Expected layout: a header row, then one row per hour with an ISO-8601 local
//! timestamp followed by the price and two exogenous series.

use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};
use epfx_core::series::HourlyRecord;
use epfx_core::{Day, HourlySeries, MarketId};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IngestError {
    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("no data rows")]
    EmptyInput,
    #[error("non-hourly cadence: {0}")]
    NonHourlyCadence(String),
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::data(e.to_string())
    }
}

const TIMESTAMP_FORMATS: [&str; 4] = ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M", "%Y-%m-%dT%H:%M"];

fn epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid date")
}

pub fn parse_timestamp(text: &str) -> Option<NaiveDateTime> {
    TIMESTAMP_FORMATS.iter().find_map(|f| NaiveDateTime::parse_from_str(text, f).ok())
}

pub fn day_of(date: NaiveDate) -> Day {
    Day(date.signed_duration_since(epoch()).num_days() as i32)
}

pub fn date_of(day: Day) -> NaiveDate {
    epoch() + chrono::Duration::days(day.0 as i64)
}

/// Parses `YYYY-MM-DD`.
pub fn parse_day(text: &str) -> Option<Day> {
    NaiveDate::parse_from_str(text.trim(), "%Y-%m-%d").ok().map(day_of)
}

pub fn format_day(day: Day) -> String {
    date_of(day).format("%Y-%m-%d").to_string()
}

pub fn day_from_ymd((y, m, d): (i32, u32, u32)) -> Day {
    day_of(NaiveDate::from_ymd_opt(y, m, d).expect("valid calendar date"))
}

fn hours_since_epoch(ts: NaiveDateTime) -> Option<i64> {
    let delta = ts.signed_duration_since(epoch().and_hms_opt(0, 0, 0)?);
    let secs = delta.num_seconds();
    (secs % 3600 == 0).then_some(secs / 3600)
}

fn field(record: &csv::StringRecord, idx: usize, line: u64, name: &str) -> Result<f64, IngestError> {
    let raw = record.get(idx).unwrap_or("").trim();
    let v: f64 = raw
        .parse()
        .map_err(|_| IngestError::MalformedRow { line, reason: format!("{name} value {raw:?} is not a number") })?;
    if !v.is_finite() {
        return Err(IngestError::MalformedRow { line, reason: format!("{name} value is not finite") });
    }
    Ok(v)
}

/// Parses a market CSV into a repaired hourly series.
pub fn parse_market_csv(text: &str, market: MarketId) -> Result<HourlySeries, IngestError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| IngestError::MalformedRow { line: 1, reason: e.to_string() })?
        .clone();
    if header.is_empty() || (header.len() == 1 && header[0].trim().is_empty()) {
        return Err(IngestError::EmptyInput);
    }
    if parse_timestamp(header[0].trim()).is_some() {
        return Err(IngestError::MalformedRow { line: 1, reason: "missing header row".into() });
    }
    if header.len() != 4 {
        return Err(IngestError::MalformedRow { line: 1, reason: format!("expected 4 columns, found {}", header.len()) });
    }

    let mut records = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|e| IngestError::MalformedRow {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        if record.len() != 4 {
            return Err(IngestError::MalformedRow { line, reason: format!("expected 4 fields, found {}", record.len()) });
        }
        let stamp = record[0].trim();
        let hour = parse_timestamp(stamp)
            .and_then(hours_since_epoch)
            .ok_or_else(|| IngestError::MalformedRow { line, reason: format!("unparseable timestamp {stamp:?}") })?;
        records.push(HourlyRecord {
            hour,
            price: field(&record, 1, line, "price")?,
            exog1: field(&record, 2, line, "exogenous 1")?,
            exog2: field(&record, 3, line, "exogenous 2")?,
        });
    }
    if records.is_empty() {
        return Err(IngestError::EmptyInput);
    }
    HourlySeries::from_records(market, records).map_err(|e| match e {
        epfx_core::Error::EmptyInput => IngestError::EmptyInput,
        other => IngestError::NonHourlyCadence(other.to_string()),
    })
}

pub fn load_market_csv(path: &Path, market: MarketId) -> Result<HourlySeries, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot read dataset {}: {e}", path.display())))?;
    parse_market_csv(&text, market).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}
