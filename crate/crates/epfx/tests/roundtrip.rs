use epfx::export::num;
use epfx::ingest::{date_of, day_of, format_day, parse_day, parse_market_csv};
use epfx_core::{Day, MarketId};
use proptest::prelude::*;

fn csv_text(start: Day, rows: &[(f64, f64, f64)]) -> String {
    let mut text = String::from("Date,Price,Exogenous 1,Exogenous 2\n");
    for (k, (p, a, b)) in rows.iter().enumerate() {
        let day = start.offset((k / 24) as i32);
        text += &format!("{} {:02}:00:00,{},{},{}\n", format_day(day), k % 24, num(*p), num(*a), num(*b));
    }
    text
}

proptest! {
    #[test]
    fn formatted_numbers_parse_back_exactly(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(num(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
    }

    #[test]
    fn days_survive_the_calendar(d in -20_000i32..40_000) {
        let day = Day(d);
        prop_assert_eq!(day_of(date_of(day)), day);
        prop_assert_eq!(parse_day(&format_day(day)), Some(day));
    }

    #[test]
    fn hourly_files_parse_without_loss(
        start in 15_000i32..17_000,
        rows in prop::collection::vec((-500.0f64..3000.0, 0.0f64..1e5, -1e4f64..1e4), 1..120),
    ) {
        let series = parse_market_csv(&csv_text(Day(start), &rows), MarketId::Be).unwrap();
        prop_assert_eq!(series.len(), rows.len());
        prop_assert_eq!(series.start_hour, start as i64 * 24);
        for (k, (p, a, b)) in rows.iter().enumerate() {
            prop_assert_eq!(series.price[k].to_bits(), p.to_bits());
            prop_assert_eq!(series.exog1[k].to_bits(), a.to_bits());
            prop_assert_eq!(series.exog2[k].to_bits(), b.to_bits());
        }
    }

    #[test]
    fn row_order_does_not_matter(
        rows in prop::collection::vec((0.0f64..100.0, 0.0f64..100.0, 0.0f64..100.0), 2..60),
        rotate in 0usize..60,
    ) {
        let text = csv_text(Day(16_000), &rows);
        let mut lines: Vec<&str> = text.lines().collect();
        let body = &mut lines[1..];
        let r = rotate % body.len();
        body.rotate_left(r);
        let shuffled = lines.join("\n") + "\n";
        prop_assert_eq!(parse_market_csv(&text, MarketId::Np).unwrap(), parse_market_csv(&shuffled, MarketId::Np).unwrap());
    }
}
