//! Deterministic SVG figures, each paired with a CSV of the plotted numbers.
//!
//! Data-carrying elements hold their exact values in `data-*` attributes formatted the
//! same way as the CSV, so a figure can always be checked against its table.

use std::fmt::Write as _;

use epfx_core::analytics::{Aggregation, BeeswarmFeature, HeatmapGrid, HourlyImportance, InstanceStack};
use epfx_core::sshap::SshapLine;
use epfx_core::{Day, HOURS};

use crate::export::{num, opt_num};
use crate::ingest::format_day;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Figure {
    pub svg: String,
    pub csv: String,
}

const PALETTE: [&str; 10] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

fn colour(k: usize) -> &'static str {
    PALETTE[k % PALETTE.len()]
}

fn esc(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

/// CSV field quoting for labels.
fn field(text: &str) -> String {
    if text.contains([',', '"', '\n']) {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}

struct Svg {
    body: String,
    width: f64,
    height: f64,
}

impl Svg {
    fn new(width: f64, height: f64, title: &str) -> Self {
        let mut s = Svg { body: String::new(), width, height };
        s.text(width / 2.0, 20.0, "middle", 14.0, title, "title");
        s
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, size: f64, text: &str, class: &str) {
        let _ = writeln!(
            self.body,
            r#"<text class="{class}" x="{x:.2}" y="{y:.2}" text-anchor="{anchor}" font-size="{size}">{}</text>"#,
            esc(text)
        );
    }

    fn vtext(&mut self, x: f64, y: f64, size: f64, text: &str) {
        let _ = writeln!(
            self.body,
            r#"<text class="axis-label" x="{x:.2}" y="{y:.2}" text-anchor="middle" font-size="{size}" transform="rotate(-90 {x:.2} {y:.2})">{}</text>"#,
            esc(text)
        );
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, dash: bool) {
        let dash = if dash { r#" stroke-dasharray="4 3""# } else { "" };
        let _ = writeln!(
            self.body,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}" stroke-width="1"{dash}/>"#
        );
    }

    fn raw(&mut self, s: &str) {
        self.body.push_str(s);
        self.body.push('\n');
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

/// Linear map from data range to pixel range; degenerate ranges map to the middle.
#[derive(Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    p0: f64,
    p1: f64,
}

impl Axis {
    fn new(lo: f64, hi: f64, p0: f64, p1: f64) -> Self {
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 1.0, lo + 1.0) };
        Axis { lo, hi, p0, p1 }
    }

    fn map(&self, v: f64) -> f64 {
        self.p0 + (v - self.lo) / (self.hi - self.lo) * (self.p1 - self.p0)
    }
}

fn range<I: IntoIterator<Item = f64>>(values: I) -> (f64, f64) {
    values.into_iter().filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
}

/// Frame with tick labels at both ends of each axis.
fn frame(svg: &mut Svg, x: Axis, y: Axis, x_label: &str, y_label: &str) {
    let (l, r, t, b) = (x.p0, x.p1, y.p1, y.p0);
    let _ = writeln!(svg.body, r##"<rect x="{l:.2}" y="{t:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#333"/>"##, r - l, b - t);
    svg.text(l, b + 14.0, "middle", 10.0, &format!("{:.1}", x.lo), "tick");
    svg.text(r, b + 14.0, "middle", 10.0, &format!("{:.1}", x.hi), "tick");
    svg.text(l - 4.0, b, "end", 10.0, &format!("{:.1}", y.lo), "tick");
    svg.text(l - 4.0, t + 4.0, "end", 10.0, &format!("{:.1}", y.hi), "tick");
    if y.lo < 0.0 && y.hi > 0.0 {
        let zero = y.map(0.0);
        svg.line(l, zero, r, zero, "#999", true);
        svg.text(l - 4.0, zero + 4.0, "end", 10.0, "0", "tick");
    }
    svg.text((l + r) / 2.0, b + 30.0, "middle", 12.0, x_label, "axis-label");
    svg.vtext(l - 44.0, (t + b) / 2.0, 12.0, y_label);
}

fn legend(svg: &mut Svg, x: f64, y: f64, labels: &[String]) {
    for (k, label) in labels.iter().enumerate() {
        let yy = y + 16.0 * k as f64;
        let _ = writeln!(svg.body, r#"<rect x="{x:.2}" y="{:.2}" width="10" height="10" fill="{}"/>"#, yy - 9.0, colour(k));
        svg.text(x + 14.0, yy, "start", 11.0, label, "legend");
    }
}

fn lerp_rgb(a: (f64, f64, f64), b: (f64, f64, f64), t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let c = |x: f64, y: f64| (x + (y - x) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", c(a.0, b.0), c(a.1, b.1), c(a.2, b.2))
}

const WHITE: (f64, f64, f64) = (255.0, 255.0, 255.0);
const RED: (f64, f64, f64) = (165.0, 0.0, 38.0);
const BLUE: (f64, f64, f64) = (49.0, 54.0, 149.0);

/// Colour scale bounds: `[0, max]` for magnitudes, symmetric around zero for signed maps.
pub fn heatmap_scale(grid: &HeatmapGrid) -> (f64, f64) {
    let (lo, hi) = range(grid.cells());
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    match grid.aggregation {
        Aggregation::MeanAbs => (0.0, if hi > 0.0 { hi } else { 1.0 }),
        _ => {
            let m = lo.abs().max(hi.abs());
            let m = if m > 0.0 { m } else { 1.0 };
            (-m, m)
        }
    }
}

fn heat_colour(v: f64, scale: (f64, f64), signed: bool) -> String {
    if signed {
        let t = v / scale.1;
        if t >= 0.0 {
            lerp_rgb(WHITE, RED, t)
        } else {
            lerp_rgb(WHITE, BLUE, -t)
        }
    } else {
        lerp_rgb(WHITE, RED, (v - scale.0) / (scale.1 - scale.0))
    }
}

/// One 24×24 cell grid per block. CSV: `super_variable, output_hour, input_hour, value, scale_min, scale_max`.
pub fn heatmap_figure(grid: &HeatmapGrid, title: &str, unit: &str) -> Figure {
    const CELL: f64 = 8.0;
    const PER_ROW: usize = 5;
    let block_px = CELL * HOURS as f64;
    let cols = grid.blocks.len().clamp(1, PER_ROW);
    let rows = grid.blocks.len().div_ceil(PER_ROW).max(1);
    let (left, top, gap) = (50.0, 40.0, 40.0);
    let width = left + cols as f64 * (block_px + gap) + 40.0;
    let height = top + rows as f64 * (block_px + gap + 14.0) + 60.0;
    let scale = heatmap_scale(grid);
    let signed = !matches!(grid.aggregation, Aggregation::MeanAbs);

    let mut svg = Svg::new(width, height, title);
    let mut csv = String::from("super_variable,output_hour,input_hour,value,scale_min,scale_max\n");
    let (smin, smax) = (num(scale.0), num(scale.1));
    for (b, block) in grid.blocks.iter().enumerate() {
        let x0 = left + (b % PER_ROW) as f64 * (block_px + gap);
        let y0 = top + (b / PER_ROW) as f64 * (block_px + gap + 14.0) + 14.0;
        svg.text(x0 + block_px / 2.0, y0 - 4.0, "middle", 11.0, &block.label, "block-label");
        let _ = writeln!(svg.body, r#"<g class="block" data-block="{}">"#, esc(&block.label));
        for out in 0..HOURS {
            for inp in 0..HOURS {
                let v = block.get(out, inp);
                let value = num(v);
                let _ = writeln!(
                    svg.body,
                    r#"<rect class="cell" x="{:.2}" y="{:.2}" width="{CELL}" height="{CELL}" fill="{}" data-out="{out}" data-in="{inp}" data-value="{value}"/>"#,
                    x0 + inp as f64 * CELL,
                    y0 + out as f64 * CELL,
                    heat_colour(v, scale, signed)
                );
                let _ = writeln!(csv, "{},{out},{inp},{value},{smin},{smax}", field(&block.label));
            }
        }
        svg.raw("</g>");
        if b % PER_ROW == 0 {
            svg.vtext(x0 - 10.0, y0 + block_px / 2.0, 10.0, "output hour");
        }
        svg.text(x0 + block_px / 2.0, y0 + block_px + 12.0, "middle", 10.0, "input hour", "axis-label");
    }

    // colour bar
    let bar_y = height - 34.0;
    let bar_w = 200.0;
    for k in 0..50 {
        let t = k as f64 / 49.0;
        let v = scale.0 + t * (scale.1 - scale.0);
        let _ = writeln!(
            svg.body,
            r#"<rect class="colour-bar" x="{:.2}" y="{bar_y:.2}" width="4.2" height="10" fill="{}"/>"#,
            left + t * bar_w,
            heat_colour(v, scale, signed)
        );
    }
    let _ = writeln!(
        svg.body,
        r#"<text class="scale-min" x="{left:.2}" y="{:.2}" font-size="10" data-value="{smin}">{smin}</text>"#,
        bar_y + 22.0
    );
    let _ = writeln!(
        svg.body,
        r#"<text class="scale-max" x="{:.2}" y="{:.2}" font-size="10" text-anchor="end" data-value="{smax}">{smax}</text>"#,
        left + bar_w + 4.0,
        bar_y + 22.0
    );
    svg.text(left + bar_w + 16.0, bar_y + 9.0, "start", 10.0, unit, "unit");
    Figure { svg: svg.finish(), csv }
}

fn polyline_segments(svg: &mut Svg, xs: &[f64], ys: &[Option<f64>], x: Axis, y: Axis, stroke: &str) {
    let mut points = String::new();
    let flush = |svg: &mut Svg, points: &mut String| {
        if !points.is_empty() {
            let _ = writeln!(svg.body, r#"<polyline fill="none" stroke="{stroke}" stroke-width="1.5" points="{}"/>"#, points.trim_end());
            points.clear();
        }
    };
    for (xv, yv) in xs.iter().zip(ys) {
        match yv {
            Some(v) => {
                let _ = write!(points, "{:.2},{:.2} ", x.map(*xv), y.map(*v));
            }
            None => flush(svg, &mut points),
        }
    }
    flush(svg, &mut points);
}

fn join<I: IntoIterator<Item = String>>(items: I) -> String {
    items.into_iter().collect::<Vec<_>>().join(" ")
}

/// SSHAP lines on a shared price grid. CSV: `group, grid_price, value`.
pub fn lines_figure(lines: &[SshapLine], title: &str, unit: &str) -> Figure {
    let (width, height) = (760.0, 440.0);
    let mut csv = String::from("group,grid_price,value\n");
    for line in lines {
        for (g, v) in line.grid.iter().zip(&line.curve) {
            let _ = writeln!(csv, "{},{},{}", field(&line.group), num(*g), opt_num(*v));
        }
    }
    let (x_lo, x_hi) = range(lines.iter().flat_map(|l| l.grid.iter().copied()));
    let (y_lo, y_hi) = range(lines.iter().flat_map(|l| l.curve.iter().flatten().copied()));
    let (x_lo, x_hi) = if x_lo.is_finite() { (x_lo, x_hi) } else { (0.0, 1.0) };
    let (y_lo, y_hi) = if y_lo.is_finite() { (y_lo.min(0.0), y_hi.max(0.0)) } else { (-1.0, 1.0) };
    let x = Axis::new(x_lo, x_hi, 70.0, 560.0);
    let y = Axis::new(y_lo, y_hi, height - 60.0, 40.0);
    let mut svg = Svg::new(width, height, title);
    frame(&mut svg, x, y, &format!("actual price ({unit})"), &format!("SSHAP ({unit})"));
    for (k, line) in lines.iter().enumerate() {
        let _ = writeln!(
            svg.body,
            r#"<g class="line" data-group="{}" data-grid="{}" data-values="{}">"#,
            esc(&line.group),
            join(line.grid.iter().map(|g| num(*g))),
            join(line.curve.iter().map(|v| v.map_or_else(|| "NA".to_string(), num)))
        );
        polyline_segments(&mut svg, &line.grid, &line.curve, x, y, colour(k));
        svg.raw("</g>");
    }
    legend(&mut svg, 580.0, 50.0, &lines.iter().map(|l| l.group.clone()).collect::<Vec<_>>());
    Figure { svg: svg.finish(), csv }
}

/// Mean |SSHAP| through the day. CSV: `group, output_hour, value`.
pub fn importance_figure(imp: &HourlyImportance, title: &str, unit: &str) -> Figure {
    let (width, height) = (760.0, 440.0);
    let ng = imp.groups.len();
    let mut csv = String::from("group,output_hour,value\n");
    for (g, label) in imp.groups.iter().enumerate() {
        for h in 0..HOURS {
            let _ = writeln!(csv, "{},{h},{}", field(label), num(imp.get(h, g)));
        }
    }
    let (_, y_hi) = range(imp.values.iter().copied());
    let x = Axis::new(0.0, (HOURS - 1) as f64, 70.0, 560.0);
    let y = Axis::new(0.0, if y_hi > 0.0 { y_hi } else { 1.0 }, height - 60.0, 40.0);
    let mut svg = Svg::new(width, height, title);
    frame(&mut svg, x, y, "output hour", &format!("mean |SSHAP| ({unit})"));
    let hours: Vec<f64> = (0..HOURS).map(|h| h as f64).collect();
    for (g, label) in imp.groups.iter().enumerate() {
        let vals: Vec<Option<f64>> = (0..HOURS).map(|h| Some(imp.values[h * ng + g])).collect();
        let _ = writeln!(
            svg.body,
            r#"<g class="importance" data-group="{}" data-values="{}">"#,
            esc(label),
            join((0..HOURS).map(|h| num(imp.get(h, g))))
        );
        polyline_segments(&mut svg, &hours, &vals, x, y, colour(g));
        svg.raw("</g>");
    }
    legend(&mut svg, 580.0, 50.0, &imp.groups);
    Figure { svg: svg.finish(), csv }
}

/// Deterministic vertical jitter in `[-1, 1]`.
fn jitter(a: usize, b: usize) -> f64 {
    let h = epfx_core::math::splitmix64(((a as u64) << 32) ^ b as u64);
    (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

/// One row of points per feature, coloured by the feature value.
/// CSV: `rank, feature, score, instance_id, feature_value, shap_value`.
pub fn beeswarm_figure(features: &[BeeswarmFeature], instances: &[Day], title: &str, unit: &str) -> Figure {
    let row_h = 22.0;
    let (width, height) = (820.0, 80.0 + row_h * features.len().max(1) as f64 + 50.0);
    let mut csv = String::from("rank,feature,score,instance_id,feature_value,shap_value\n");
    for (r, f) in features.iter().enumerate() {
        let label = f.feature.to_string();
        for (i, (fv, sv)) in f.points.iter().enumerate() {
            let id = instances.get(i).map(|d| format_day(*d)).unwrap_or_default();
            let _ = writeln!(csv, "{},{},{},{id},{},{}", r + 1, field(&label), num(f.score), num(*fv), num(*sv));
        }
    }
    let (lo, hi) = range(features.iter().flat_map(|f| f.points.iter().map(|p| p.1)));
    let m = if lo.is_finite() { lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE) } else { 1.0 };
    let x = Axis::new(-m, m, 220.0, 780.0);
    let y = Axis::new(0.0, features.len().max(1) as f64, 50.0 + row_h * features.len().max(1) as f64, 50.0);
    let mut svg = Svg::new(width, height, title);
    frame(&mut svg, x, y, &format!("SHAP value, mean over output hours ({unit})"), "");
    for (r, f) in features.iter().enumerate() {
        let label = f.feature.to_string();
        let cy = 50.0 + row_h * (r as f64 + 0.5);
        svg.text(214.0, cy + 4.0, "end", 11.0, &label, "feature");
        let (flo, fhi) = range(f.points.iter().map(|p| p.0));
        let _ = writeln!(svg.body, r#"<g class="feature" data-feature="{}" data-score="{}">"#, esc(&label), num(f.score));
        for (i, (fv, sv)) in f.points.iter().enumerate() {
            let t = if fhi > flo { (fv - flo) / (fhi - flo) } else { 0.5 };
            let _ = writeln!(
                svg.body,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{}" data-feature-value="{}" data-value="{}"/>"#,
                x.map(*sv),
                cy + 7.0 * jitter(r, i),
                lerp_rgb(BLUE, RED, t),
                num(*fv),
                num(*sv)
            );
        }
        svg.raw("</g>");
    }
    svg.text(780.0, height - 8.0, "end", 10.0, "colour: low to high feature value", "legend");
    Figure { svg: svg.finish(), csv }
}

/// Stacked per-hour group contributions with the forecast and actual price relative to the baseline.
/// CSV: `output_hour, series, value` where series is a group label, `baseline`, `forecast` or `actual`.
pub fn instance_stack_figure(stack: &InstanceStack, title: &str, unit: &str) -> Figure {
    let ng = stack.groups.len();
    let mut csv = String::from("output_hour,series,value\n");
    for h in 0..HOURS {
        for (g, label) in stack.groups.iter().enumerate() {
            let _ = writeln!(csv, "{h},{},{}", field(label), num(stack.contributions[h * ng + g]));
        }
        let _ = writeln!(csv, "{h},baseline,{}", num(stack.baseline[h]));
        let _ = writeln!(csv, "{h},forecast,{}", num(stack.forecast[h]));
        let _ = writeln!(csv, "{h},actual,{}", num(stack.actual[h]));
    }

    let mut lo: f64 = 0.0;
    let mut hi: f64 = 0.0;
    for h in 0..HOURS {
        let row = &stack.contributions[h * ng..(h + 1) * ng];
        lo = lo.min(row.iter().filter(|v| **v < 0.0).sum());
        hi = hi.max(row.iter().filter(|v| **v > 0.0).sum());
        for v in [stack.forecast[h] - stack.baseline[h], stack.actual[h] - stack.baseline[h]] {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let (width, height) = (820.0, 460.0);
    let x = Axis::new(-0.5, HOURS as f64 - 0.5, 70.0, 600.0);
    let y = Axis::new(lo, hi, height - 60.0, 40.0);
    let mut svg = Svg::new(width, height, title);
    frame(&mut svg, x, y, "output hour", &format!("contribution to forecast − baseline ({unit})"));
    let bar_w = (x.map(1.0) - x.map(0.0)) * 0.7;
    for h in 0..HOURS {
        let cx = x.map(h as f64);
        let (mut up, mut down) = (0.0, 0.0);
        for g in 0..ng {
            let v = stack.contributions[h * ng + g];
            let (a, b) = if v >= 0.0 {
                up += v;
                (up - v, up)
            } else {
                down += v;
                (down, down - v)
            };
            let _ = writeln!(
                svg.body,
                r#"<rect class="bar" x="{:.2}" y="{:.2}" width="{bar_w:.2}" height="{:.2}" fill="{}" data-hour="{h}" data-group="{}" data-value="{}"/>"#,
                cx - bar_w / 2.0,
                y.map(b),
                (y.map(a) - y.map(b)).abs(),
                colour(g),
                esc(&stack.groups[g]),
                num(v)
            );
        }
    }
    let hours: Vec<f64> = (0..HOURS).map(|h| h as f64).collect();
    for (name, series, stroke) in [("forecast", &stack.forecast, "#000"), ("actual", &stack.actual, "#555")] {
        let rel: Vec<Option<f64>> = (0..HOURS).map(|h| Some(series[h] - stack.baseline[h])).collect();
        let _ = writeln!(
            svg.body,
            r#"<g class="{name}" data-values="{}" data-baseline="{}">"#,
            join(series.iter().map(|v| num(*v))),
            join(stack.baseline.iter().map(|v| num(*v)))
        );
        polyline_segments(&mut svg, &hours, &rel, x, y, stroke);
        svg.raw("</g>");
    }
    let mut labels = stack.groups.clone();
    labels.push("forecast − baseline (black)".into());
    labels.push("actual − baseline (grey)".into());
    legend(&mut svg, 620.0, 50.0, &labels);
    Figure { svg: svg.finish(), csv }
}
