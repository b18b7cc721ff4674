//! Every figure carries the exact numbers of its companion table.

mod common;

use std::collections::BTreeMap;
use std::path::Path;

use common::*;
use epfx::config::{load, Overrides};
use epfx::pipeline::{cmd_explain, cmd_report, cmd_train};
use epfx_core::MarketId;
use serde_json::json;

/// Values of every ` name="..."` attribute, in document order.
fn attrs(svg: &str, name: &str) -> Vec<String> {
    let key = format!(" {name}=\"");
    svg.match_indices(&key)
        .map(|(at, _)| {
            let rest = &svg[at + key.len()..];
            rest[..rest.find('"').unwrap()].to_string()
        })
        .collect()
}

fn table(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<String> {
    let k = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[k].clone()).collect()
}

fn na(v: String) -> String {
    if v.is_empty() { "NA".into() } else { v }
}

/// `data-group` → space-separated `data-values`, checked against CSV rows of (group, value).
fn grouped(svg: &str, header: &[String], rows: &[Vec<String>]) {
    let groups = attrs(svg, "data-group");
    let values = attrs(svg, "data-values");
    assert_eq!(groups.len(), values.len());
    let mut from_csv: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (g, v) in column(header, rows, "group").into_iter().zip(column(header, rows, "value")) {
        from_csv.entry(g).or_default().push(na(v));
    }
    assert_eq!(from_csv.len(), groups.len());
    for (g, v) in groups.iter().zip(&values) {
        let svg_vals: Vec<String> = v.split(' ').map(str::to_string).collect();
        assert_eq!(&svg_vals, &from_csv[g], "group {g}");
    }
}

fn check_figure(svg_path: &Path, csv_path: &Path) -> usize {
    let svg = std::fs::read_to_string(svg_path).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    assert!(svg.trim_end().ends_with("</svg>"));
    let (header, rows) = table(csv_path);
    assert!(!rows.is_empty());
    let name = svg_path.file_stem().unwrap().to_str().unwrap();
    if name.starts_with("heatmap_") {
        assert_eq!(attrs(&svg, "data-value").len(), rows.len() + 2);
        let cells: Vec<String> =
            svg.lines().filter(|l| l.contains(r#"class="cell""#)).flat_map(|l| attrs(l, "data-value")).collect();
        assert_eq!(cells, column(&header, &rows, "value"));
        let outs: Vec<String> = svg.lines().filter(|l| l.contains(r#"class="cell""#)).flat_map(|l| attrs(l, "data-out")).collect();
        assert_eq!(outs, column(&header, &rows, "output_hour"));
        let lo = svg.lines().find(|l| l.contains(r#"class="scale-min""#)).unwrap();
        assert_eq!(attrs(lo, "data-value")[0], column(&header, &rows, "scale_min")[0]);
        let hi = svg.lines().find(|l| l.contains(r#"class="scale-max""#)).unwrap();
        assert_eq!(attrs(hi, "data-value")[0], column(&header, &rows, "scale_max")[0]);
    } else if name.starts_with("sshap_lines_") || name.starts_with("importance_") {
        grouped(&svg, &header, &rows);
        if name.starts_with("sshap_lines_") {
            let grids = attrs(&svg, "data-grid");
            let csv_grid = column(&header, &rows, "grid_price");
            assert_eq!(grids.join(" ").split(' ').collect::<Vec<_>>(), csv_grid);
        }
    } else if name == "beeswarm" {
        assert_eq!(attrs(&svg, "data-value"), column(&header, &rows, "shap_value"));
        assert_eq!(attrs(&svg, "data-feature-value"), column(&header, &rows, "feature_value"));
        let mut scores = column(&header, &rows, "score");
        scores.dedup();
        assert_eq!(attrs(&svg, "data-score"), scores);
    } else if name.starts_with("instance_") {
        let series = column(&header, &rows, "series");
        let values = column(&header, &rows, "value");
        let pick = |s: &str| -> Vec<String> {
            series.iter().zip(&values).filter(|(a, _)| a.as_str() == s).map(|(_, v)| v.clone()).collect()
        };
        let bars: Vec<String> = series
            .iter()
            .zip(&values)
            .filter(|(s, _)| !["baseline", "forecast", "actual"].contains(&s.as_str()))
            .map(|(_, v)| v.clone())
            .collect();
        assert_eq!(attrs(&svg, "data-value"), bars);
        let lines = attrs(&svg, "data-values");
        assert_eq!(lines[0], pick("forecast").join(" "));
        assert_eq!(lines[1], pick("actual").join(" "));
        assert_eq!(attrs(&svg, "data-baseline")[0], pick("baseline").join(" "));
    } else {
        panic!("unchecked figure {name}");
    }
    rows.len()
}

#[test]
fn figures_match_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path(), MarketId::Np, 160);
    let (first, _) = MarketId::Np.training_window();
    cfg["instance_dates"] = json!([epfx::ingest::format_day(epfx::ingest::day_from_ymd(first).offset(30))]);
    let path = write_config(dir.path(), &cfg);
    let res = load(&path, &Overrides::default()).unwrap();
    cmd_train(&res).unwrap();
    cmd_explain(&res, None).unwrap();
    cmd_report(&res.output_dir).unwrap();

    let figures = files_with_ext(&res.output_dir.join("figures"), "svg");
    let mut kinds = std::collections::BTreeSet::new();
    for svg in &figures {
        let stem = svg.file_stem().unwrap().to_str().unwrap();
        check_figure(svg, &res.output_dir.join("tables").join(format!("{stem}.csv")));
        kinds.insert(stem.split('_').next().unwrap().to_string());
    }
    let expected: std::collections::BTreeSet<String> =
        ["beeswarm", "heatmap", "importance", "instance", "sshap"].iter().map(|s| s.to_string()).collect();
    assert_eq!(kinds, expected);
}

#[test]
fn french_heatmap_has_five_blocks_of_576_cells() {
    let model = epfx::oracle::french_sized_model(4);
    let features = epfx_core::MarketConfig::builtin(MarketId::Fr).feature_ids();
    let n = features.len();
    let grads: Vec<f64> = (0..3)
        .flat_map(|k| {
            let x: Vec<f64> = (0..n).map(|i| 40.0 + ((i + 7 * k) as f64).sin() * 10.0).collect();
            model.jacobian(&x).unwrap()
        })
        .collect();
    let tensor = epfx_core::attribution::AttributionTensor {
        kind: epfx_core::attribution::AttributionKind::Gradient,
        instances: (0..3).map(epfx_core::Day).collect(),
        features,
        n_outputs: 24,
        values: grads,
        baseline: Vec::new(),
    };
    let grid = epfx_core::analytics::heatmap(&tensor, epfx_core::analytics::Aggregation::Mean).unwrap();
    assert_eq!(grid.blocks.len(), 5);
    let fig = epfx::render::heatmap_figure(&grid, "gradients", "EUR/MWh");
    assert_eq!(fig.svg.matches(r#"class="cell""#).count(), 5 * 576);
    assert_eq!(fig.csv.lines().count(), 1 + 5 * 576);
}
