use epfx::ingest::{day_of, load_market_csv, parse_market_csv, IngestError};
use epfx::synthetic::synthetic_csv;
use epfx_core::{build_feature_matrix, Day, MarketConfig, MarketId, Source};

const HEADER: &str = "Date,Price,Exogenous 1,Exogenous 2\n";

fn hourly_rows(day: &str, hours: impl Iterator<Item = u32>, value: impl Fn(u32) -> f64) -> String {
    hours.map(|h| format!("{day} {h:02}:00:00,{},{},{}\n", value(h), 1000 + h, 500 + h)).collect()
}

#[test]
fn autumn_duplicate_hour_is_averaged() {
    let mut text = HEADER.to_string();
    text += &hourly_rows("2016-10-29", 0..24, |h| h as f64);
    // 02:00 appears twice on the clock-change day
    text += &hourly_rows("2016-10-30", 0..3, |h| 100.0 + h as f64);
    text += "2016-10-30 02:00:00,110,1002,502\n";
    text += &hourly_rows("2016-10-30", 3..24, |h| 100.0 + h as f64);
    assert_eq!(text.lines().count(), 1 + 49);
    let series = parse_market_csv(&text, MarketId::Fr).unwrap();
    assert_eq!(series.len(), 48);
    let day = day_of(chrono::NaiveDate::from_ymd_opt(2016, 10, 30).unwrap());
    assert_eq!(series.value(Source::Price, day, 2), Some(106.0));
    assert_eq!(series.value(Source::Price, day, 3), Some(103.0));
}

#[test]
fn spring_missing_hour_is_filled() {
    let mut text = HEADER.to_string();
    text += &hourly_rows("2016-03-26", 0..24, |_| 20.0);
    text += &hourly_rows("2016-03-27", (0..24).filter(|&h| h != 2), |h| h as f64 * 2.0);
    let series = parse_market_csv(&text, MarketId::Fr).unwrap();
    assert_eq!(series.len(), 48);
    let day = day_of(chrono::NaiveDate::from_ymd_opt(2016, 3, 27).unwrap());
    assert_eq!(series.value(Source::Price, day, 2), Some(4.0));
}

#[test]
fn header_only_is_empty_input() {
    assert_eq!(parse_market_csv(HEADER, MarketId::Np), Err(IngestError::EmptyInput));
    assert_eq!(parse_market_csv("", MarketId::Np), Err(IngestError::EmptyInput));
}

#[test]
fn malformed_rows_report_their_line() {
    let mut text = HEADER.to_string();
    text += &hourly_rows("2016-01-01", 0..3, |h| h as f64);
    text += "2016-01-01 03:00:00,abc,1,2\n";
    match parse_market_csv(&text, MarketId::Np) {
        Err(IngestError::MalformedRow { line, .. }) => assert_eq!(line, 5),
        other => panic!("unexpected {other:?}"),
    }

    let short = format!("{HEADER}2016-01-01 00:00:00,1,2\n");
    assert!(matches!(parse_market_csv(&short, MarketId::Np), Err(IngestError::MalformedRow { line: 2, .. })));

    let bad_time = format!("{HEADER}01/01/2016 00:00,1,2,3\n");
    assert!(matches!(parse_market_csv(&bad_time, MarketId::Np), Err(IngestError::MalformedRow { line: 2, .. })));

    let infinite = format!("{HEADER}2016-01-01 00:00:00,inf,2,3\n");
    assert!(matches!(parse_market_csv(&infinite, MarketId::Np), Err(IngestError::MalformedRow { line: 2, .. })));
}

#[test]
fn missing_header_is_reported_on_line_one() {
    let text = hourly_rows("2016-01-01", 0..24, |h| h as f64);
    assert!(matches!(parse_market_csv(&text, MarketId::Np), Err(IngestError::MalformedRow { line: 1, .. })));
}

#[test]
fn long_gaps_are_not_hourly() {
    let mut text = HEADER.to_string();
    text += &hourly_rows("2016-01-01", 0..24, |h| h as f64);
    text += &hourly_rows("2016-01-03", 0..24, |h| h as f64);
    assert!(matches!(parse_market_csv(&text, MarketId::Np), Err(IngestError::NonHourlyCadence(_))));
}

#[test]
fn german_window_has_expected_row_count_and_feature_layout() {
    // 2012-09-05 .. 2016-09-04 inclusive
    let (first, last) = MarketId::De.training_window();
    let first = epfx::ingest::day_from_ymd(first);
    let last = epfx::ingest::day_from_ymd(last);
    let days = (last.0 - first.0 + 1) as usize;
    assert_eq!(days * 24, 35_064);

    let config = MarketConfig::builtin(MarketId::De);
    let lead = config.max_lag() as usize;
    let text = synthetic_csv(first.offset(-(lead as i32)), days + lead, 5);
    let series = parse_market_csv(&text, MarketId::De).unwrap();
    assert_eq!(series.len(), (days + lead) * 24);
    let fm = build_feature_matrix(&series, &config).unwrap();
    assert_eq!(fm.n_features(), 217);
    assert_eq!(fm.instances.first(), Some(&first));
    assert_eq!(fm.instances.last(), Some(&last));
}

#[test]
fn monday_instance_date_is_in_the_german_window() {
    let day = epfx::ingest::parse_day("2015-12-07").unwrap();
    assert_eq!(day, Day(16776));
    assert_eq!(day.weekday(), 0);
}

#[test]
fn missing_file_is_a_data_error() {
    let err = load_market_csv(std::path::Path::new("/nonexistent/x.csv"), MarketId::Np).unwrap_err();
    assert_eq!(err.kind, epfx::ErrorKind::Data);
    assert!(err.message.contains("/nonexistent/x.csv"));
}
