//! Deterministic SVG plots: ROC curves, training curves and AUC box plots.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use peoc_core::evalx::{parse_auc_table, parse_roc_csv, quantile_sorted, AucRecord};
use peoc_core::ppo::TrainingCurve;

use crate::error::{BenchError, Result};

pub const CANVAS_WIDTH: f64 = 640.0;
pub const CANVAS_HEIGHT: f64 = 480.0;
pub const MARGIN_LEFT: f64 = 70.0;
pub const MARGIN_RIGHT: f64 = 170.0;
pub const MARGIN_TOP: f64 = 40.0;
pub const MARGIN_BOTTOM: f64 = 60.0;
/// Series colors, assigned by classifier index.
pub const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

pub fn color(index: usize) -> &'static str {
    PALETTE[index % PALETTE.len()]
}

/// Inputs, output and labels of one plot.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub inputs: Vec<PathBuf>,
    pub output: PathBuf,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
}

/// A rectangle on the canvas mapping data coordinates to pixels.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
}

impl Frame {
    pub fn main(x_range: (f64, f64), y_range: (f64, f64)) -> Self {
        Self {
            left: MARGIN_LEFT,
            top: MARGIN_TOP,
            width: CANVAS_WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
            height: CANVAS_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM,
            x_range,
            y_range,
        }
    }

    pub fn px(&self, x: f64) -> f64 {
        let (lo, hi) = self.x_range;
        let t = if hi > lo { (x - lo) / (hi - lo) } else { 0.5 };
        self.left + t * self.width
    }

    pub fn py(&self, y: f64) -> f64 {
        let (lo, hi) = self.y_range;
        let t = if hi > lo { (y - lo) / (hi - lo) } else { 0.5 };
        self.top + (1.0 - t) * self.height
    }
}

/// Formats a pixel coordinate with a fixed precision.
pub fn fmt(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn open(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
        w = CANVAS_WIDTH,
        h = CANVAS_HEIGHT
    );
    let _ = writeln!(out, r#"<rect width="{}" height="{}" fill="white"/>"#, CANVAS_WIDTH, CANVAS_HEIGHT);
    let _ = writeln!(
        out,
        r#"<text class="title" x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#,
        fmt(CANVAS_WIDTH / 2.0),
        escape(title)
    );
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str, x_ticks: &[f64], y_ticks: &[f64]) {
    let _ = writeln!(
        out,
        r#"<rect class="frame" x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        fmt(f.left),
        fmt(f.top),
        fmt(f.width),
        fmt(f.height)
    );
    let bottom = f.top + f.height;
    for &t in x_ticks {
        let x = fmt(f.px(t));
        let _ = writeln!(out, r#"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="black"/>"#, fmt(bottom), fmt(bottom + 5.0));
        let _ = writeln!(out, r#"<text x="{x}" y="{}" text-anchor="middle">{}</text>"#, fmt(bottom + 18.0), tick_label(t));
    }
    for &t in y_ticks {
        let y = fmt(f.py(t));
        let _ = writeln!(out, r#"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="black"/>"#, fmt(f.left - 5.0), fmt(f.left));
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, fmt(f.left - 8.0), fmt(f.py(t) + 4.0), tick_label(t));
    }
    let _ = writeln!(
        out,
        r#"<text class="x-label" x="{}" y="{}" text-anchor="middle">{}</text>"#,
        fmt(f.left + f.width / 2.0),
        fmt(bottom + 40.0),
        escape(x_label)
    );
    let (lx, ly) = (f.left - 48.0, f.top + f.height / 2.0);
    let _ = writeln!(
        out,
        r#"<text class="y-label" x="{}" y="{}" text-anchor="middle" transform="rotate(-90 {} {})">{}</text>"#,
        fmt(lx),
        fmt(ly),
        fmt(lx),
        fmt(ly),
        escape(y_label)
    );
}

fn tick_label(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() >= 1.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn legend_entry(out: &mut String, row: usize, color: &str, text: &str) {
    let x = CANVAS_WIDTH - MARGIN_RIGHT + 15.0;
    let y = MARGIN_TOP + 10.0 + 20.0 * row as f64;
    let _ = writeln!(out, r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{color}" stroke-width="2"/>"#, fmt(x), fmt(y), fmt(x + 20.0), fmt(y));
    let _ = writeln!(out, r#"<text class="legend" x="{}" y="{}">{}</text>"#, fmt(x + 26.0), fmt(y + 4.0), escape(text));
}

fn polyline(f: &Frame, points: impl IntoIterator<Item = (f64, f64)>) -> String {
    points.into_iter().map(|(x, y)| format!("{},{}", fmt(f.px(x)), fmt(f.py(y)))).collect::<Vec<_>>().join(" ")
}

/// One ROC curve to draw.
#[derive(Debug, Clone, PartialEq)]
pub struct RocSeries {
    pub name: String,
    /// `(fpr, tpr)` vertices from (0,0) to (1,1).
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

impl RocSeries {
    /// Builds a series from ROC CSV text; the AUC is the trapezoidal area.
    pub fn from_csv(name: impl Into<String>, text: &str) -> Result<Self> {
        let rows = parse_roc_csv(text)?;
        let points: Vec<(f64, f64)> = rows.iter().map(|&(_, fpr, tpr)| (fpr, tpr)).collect();
        let auc = points.windows(2).map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0).sum();
        Ok(Self { name: name.into(), points, auc })
    }
}

pub fn roc_svg(series: &[RocSeries], title: &str, x_label: &str, y_label: &str) -> String {
    let f = Frame::main((0.0, 1.0), (0.0, 1.0));
    let ticks = [0.0, 0.25, 0.5, 0.75, 1.0];
    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, &f, x_label, y_label, &ticks, &ticks);
    let _ = writeln!(
        out,
        r##"<line class="diagonal" x1="{}" y1="{}" x2="{}" y2="{}" stroke="#999999" stroke-dasharray="4 4"/>"##,
        fmt(f.px(0.0)),
        fmt(f.py(0.0)),
        fmt(f.px(1.0)),
        fmt(f.py(1.0))
    );
    for (i, s) in series.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<polyline class="roc" data-name="{}" points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
            escape(&s.name),
            polyline(&f, s.points.iter().copied()),
            color(i)
        );
        legend_entry(&mut out, i, color(i), &format!("{} (AUC {:.3})", s.name, s.auc));
    }
    out.push_str("</svg>\n");
    out
}

pub fn training_svg(curve: &TrainingCurve, title: &str) -> String {
    let n = curve.points.last().map_or(1, |p| p.update).max(1) as f64;
    let max_return = curve.points.iter().map(|p| p.mean_return).fold(10.0, f64::max);
    let max_entropy = curve.points.iter().map(|p| p.mean_entropy).fold(4f64.ln(), f64::max);
    let full = Frame::main((0.0, n), (0.0, 1.0));
    let gap = 30.0;
    let half = (full.height - gap) / 2.0;
    let top = Frame { height: half, y_range: (0.0, max_return), ..full };
    let bottom = Frame { top: full.top + half + gap, height: half, y_range: (0.0, max_entropy), ..full };
    let x_ticks = [0.0, n / 2.0, n].map(f64::round);
    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, &top, "", "mean return", &[], &[0.0, max_return]);
    axes(&mut out, &bottom, "update", "mean entropy", &x_ticks, &[0.0, max_entropy]);
    let _ = writeln!(
        out,
        r#"<polyline class="return" points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
        polyline(&top, curve.points.iter().map(|p| (p.update as f64, p.mean_return))),
        color(0)
    );
    let _ = writeln!(
        out,
        r#"<polyline class="entropy" points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
        polyline(&bottom, curve.points.iter().map(|p| (p.update as f64, p.mean_entropy))),
        color(1)
    );
    legend_entry(&mut out, 0, color(0), "mean return");
    legend_entry(&mut out, 1, color(1), "mean entropy");
    out.push_str("</svg>\n");
    out
}

/// Box-plot statistics of one classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxStats {
    pub name: String,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

impl BoxStats {
    pub fn new(name: impl Into<String>, values: &[f64]) -> Result<Self> {
        let mut sorted = values.to_vec();
        if sorted.is_empty() {
            return Err(peoc_core::Error::EmptyInput("box plot values").into());
        }
        sorted.sort_by(f64::total_cmp);
        let q1 = quantile_sorted(&sorted, 0.25);
        let median = quantile_sorted(&sorted, 0.5);
        let q3 = quantile_sorted(&sorted, 0.75);
        let iqr = q3 - q1;
        let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        let inside: Vec<f64> = sorted.iter().copied().filter(|v| (lo_fence..=hi_fence).contains(v)).collect();
        let outliers = sorted.iter().copied().filter(|v| !(lo_fence..=hi_fence).contains(v)).collect();
        Ok(Self {
            name: name.into(),
            q1,
            median,
            q3,
            whisker_low: inside.first().copied().unwrap_or(q1),
            whisker_high: inside.last().copied().unwrap_or(q3),
            outliers,
        })
    }
}

/// Groups records by classifier in order of first appearance.
pub fn box_stats(records: &[AucRecord]) -> Result<Vec<BoxStats>> {
    let mut groups: Vec<(String, Vec<f64>)> = Vec::new();
    for r in records {
        match groups.iter_mut().find(|(name, _)| *name == r.classifier) {
            Some((_, v)) => v.push(r.auc),
            None => groups.push((r.classifier.clone(), vec![r.auc])),
        }
    }
    groups.iter().map(|(name, values)| BoxStats::new(name.clone(), values)).collect()
}

pub fn box_svg(boxes: &[BoxStats], title: &str, x_label: &str, y_label: &str) -> String {
    let f = Frame::main((0.0, boxes.len().max(1) as f64), (0.0, 1.0));
    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, &f, x_label, y_label, &[], &[0.0, 0.25, 0.5, 0.75, 1.0]);
    let _ = writeln!(
        out,
        r##"<line class="chance" x1="{}" y1="{}" x2="{}" y2="{}" stroke="#999999" stroke-dasharray="4 4"/>"##,
        fmt(f.left),
        fmt(f.py(0.5)),
        fmt(f.left + f.width),
        fmt(f.py(0.5))
    );
    let slot = f.width / boxes.len().max(1) as f64;
    let half = (slot * 0.3).min(30.0);
    for (i, b) in boxes.iter().enumerate() {
        let c = color(i);
        let cx = f.px(i as f64 + 0.5);
        let name = escape(&b.name);
        let _ = writeln!(out, r#"<g class="box" data-classifier="{name}">"#);
        let _ = writeln!(
            out,
            r#"<line class="whisker" x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="black"/>"#,
            fmt(f.py(b.whisker_low)),
            fmt(f.py(b.q1)),
            x = fmt(cx)
        );
        let _ = writeln!(
            out,
            r#"<line class="whisker" x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="black"/>"#,
            fmt(f.py(b.q3)),
            fmt(f.py(b.whisker_high)),
            x = fmt(cx)
        );
        for w in [b.whisker_low, b.whisker_high] {
            let _ = writeln!(
                out,
                r#"<line class="whisker-cap" x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="black"/>"#,
                fmt(cx - half / 2.0),
                fmt(cx + half / 2.0),
                y = fmt(f.py(w))
            );
        }
        let _ = writeln!(
            out,
            r#"<rect class="quartiles" x="{}" y="{}" width="{}" height="{}" fill="{c}" fill-opacity="0.4" stroke="{c}"/>"#,
            fmt(cx - half),
            fmt(f.py(b.q3)),
            fmt(2.0 * half),
            fmt(f.py(b.q1) - f.py(b.q3))
        );
        let _ = writeln!(
            out,
            r#"<line class="median" data-classifier="{name}" x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="black" stroke-width="2"/>"#,
            fmt(cx - half),
            fmt(cx + half),
            y = fmt(f.py(b.median))
        );
        for &o in &b.outliers {
            let _ = writeln!(out, r#"<circle class="outlier" cx="{}" cy="{}" r="3" fill="none" stroke="{c}"/>"#, fmt(cx), fmt(f.py(o)));
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{name}</text>"#,
            fmt(cx),
            fmt(f.top + f.height + 18.0)
        );
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| BenchError::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| BenchError::io(path, e))
}

fn series_name(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

pub fn emit_roc_svg(spec: &PlotSpec) -> Result<()> {
    if spec.inputs.is_empty() {
        return Err(BenchError::Usage("plot roc needs at least one ROC CSV".into()));
    }
    let series = spec
        .inputs
        .iter()
        .map(|p| RocSeries::from_csv(series_name(p), &read(p)?))
        .collect::<Result<Vec<_>>>()?;
    write_file(&spec.output, roc_svg(&series, &spec.title, &spec.x_label, &spec.y_label))
}

pub fn emit_training_svg(spec: &PlotSpec) -> Result<()> {
    let [input] = spec.inputs.as_slice() else {
        return Err(BenchError::Usage("plot training takes exactly one curve CSV".into()));
    };
    let curve = TrainingCurve::from_csv(&read(input)?)?;
    write_file(&spec.output, training_svg(&curve, &spec.title))
}

pub fn emit_box_svg(spec: &PlotSpec) -> Result<()> {
    if spec.inputs.is_empty() {
        return Err(BenchError::Usage("plot box needs an AUC table".into()));
    }
    let mut records = Vec::new();
    for p in &spec.inputs {
        records.extend(parse_auc_table(&read(p)?)?);
    }
    let boxes = box_stats(&records)?;
    write_file(&spec.output, box_svg(&boxes, &spec.title, &spec.x_label, &spec.y_label))
}
