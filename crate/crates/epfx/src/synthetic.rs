//! Deterministic synthetic market data with daily and weekly structure.
//!
//! The price responds to yesterday's price at the same hour, today's load and today's
//! generation, so every built-in market layout carries real signal.

use std::fmt::Write as _;

use epfx_core::math::standard_normal;
use epfx_core::series::HourlyRecord;
use epfx_core::{Day, HOURS};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ingest::date_of;

/// Hourly records for `days` consecutive days from `start`.
pub fn synthetic_records(start: Day, days: usize, seed: u64) -> Vec<HourlyRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(days * HOURS);
    let mut prev_price = [40.0; HOURS];
    let mut wind_state = 0.0;
    for d in 0..days {
        let day = start.offset(d as i32);
        let weekend = day.weekday() >= 5;
        wind_state = 0.7 * wind_state + 0.7 * standard_normal(&mut rng);
        let mut today = [0.0; HOURS];
        for (h, slot) in today.iter_mut().enumerate() {
            let phase = std::f64::consts::TAU * h as f64 / HOURS as f64;
            let shape = -(phase.cos()) * 0.6 + (2.0 * phase).sin() * 0.2;
            let load = 30_000.0 + 8_000.0 * shape - if weekend { 4_000.0 } else { 0.0 } + 500.0 * standard_normal(&mut rng);
            let generation = (5_000.0 + 2_500.0 * wind_state + 400.0 * standard_normal(&mut rng)).max(0.0);
            let price = 8.0 + 0.45 * prev_price[h] + 0.0009 * load - 0.0015 * generation + 1.5 * standard_normal(&mut rng);
            *slot = price;
            out.push(HourlyRecord { hour: day.0 as i64 * HOURS as i64 + h as i64, price, exog1: load, exog2: generation });
        }
        prev_price = today;
    }
    out
}

/// The same data in the market CSV layout.
pub fn synthetic_csv(start: Day, days: usize, seed: u64) -> String {
    let mut text = String::from("Date,Price,Exogenous 1,Exogenous 2\n");
    for r in synthetic_records(start, days, seed) {
        let day = Day(r.hour.div_euclid(HOURS as i64) as i32);
        let hour = r.hour.rem_euclid(HOURS as i64);
        let _ = writeln!(
            text,
            "{} {:02}:00:00,{},{},{}",
            date_of(day).format("%Y-%m-%d"),
            hour,
            r.price,
            r.exog1,
            r.exog2
        );
    }
    text
}
