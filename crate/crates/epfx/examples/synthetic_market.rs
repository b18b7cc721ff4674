//! Writes a synthetic market CSV and a matching run config into a directory.
//!
//! ```text
//! cargo run -p epfx --example synthetic_market -- <dir> [MARKET] [days] [seed]
//! ```

use std::path::PathBuf;

use epfx::ingest::{day_from_ymd, format_day};
use epfx::synthetic::synthetic_csv;
use epfx_core::{MarketConfig, MarketId};

fn main() -> std::io::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "synthetic-run".into()));
    let market = args.next().and_then(|m| MarketId::parse(&m)).unwrap_or(MarketId::Np);
    let days: usize = args.next().and_then(|d| d.parse().ok()).unwrap_or(400);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);

    let (first, _) = market.training_window();
    let lead = MarketConfig::builtin(market).max_lag() as i32;
    let start = day_from_ymd(first).offset(-lead);
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("market.csv"), synthetic_csv(start, days + lead as usize, seed))?;
    let config = serde_json::json!({
        "market": market,
        "dataset": "market.csv",
        "end": format_day(day_from_ymd(first).offset(days as i32 - 1)),
        "seed": seed,
        "training": {"max_epochs": 40},
        "attribution": {"n_pairs": 16, "max_instances": 60},
        "output_dir": "out",
    });
    std::fs::write(dir.join("config.json"), serde_json::to_string_pretty(&config)? + "\n")?;
    println!("{}", dir.join("config.json").display());
    Ok(())
}
