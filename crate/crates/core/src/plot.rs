//! Deterministic SVG figures: a single fit with optional confidence band,
//! a grid of panels for a model comparison, and class-frequency bars.
//!
//! Styling is fixed: observations are open grey circles, fitted curves solid
//! dark blue, band limits dashed. Axes and ticks are drawn with `<line>`
//! elements so the only `<path>` elements are data curves. Coordinates are
//! printed with three decimals; nothing time- or environment-dependent is
//! emitted.

use std::fmt::Write as _;

use crate::classify::ClassSummary;
use crate::data::{high_res_grid, Dataset};
use crate::error::{Error, Result};
use crate::fit::FitResult;
use crate::inference::{r_squared_from_sse, PredictionBand};
use crate::model::{ModelClass, ModelId};

/// Points on each fitted curve.
pub const CURVE_POINTS: usize = 200;

/// Headroom above the data maximum on normalized axes.
pub const NORMALIZED_MAX: f64 = 1.05;

const FIT_COLOR: &str = "#1f4e79";
const BAND_COLOR: &str = "#6a8fb5";
const POINT_COLOR: &str = "#555555";
const DASH: &str = "6 4";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    SingleFit,
    PanelGrid,
    ClassFrequency,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub kind: PlotKind,
    pub width: f64,
    pub height: f64,
    pub show_ci: bool,
    pub normalize_axes: bool,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
}

impl PlotSpec {
    pub fn new(kind: PlotKind) -> Self {
        let (width, height, x, y) = match kind {
            PlotKind::SingleFit => (640.0, 480.0, "Irradiance", "Photosynthetic rate"),
            PlotKind::PanelGrid => (1200.0, 900.0, "I / max(I)", "P / max(P)"),
            PlotKind::ClassFrequency => (560.0, 420.0, "Curve type", "Relative frequency"),
        };
        PlotSpec {
            kind,
            width,
            height,
            show_ci: kind == PlotKind::SingleFit,
            normalize_axes: kind == PlotKind::PanelGrid,
            title: String::new(),
            x_label: x.into(),
            y_label: y.into(),
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.width > 0.0 && self.height > 0.0 && self.width.is_finite() && self.height.is_finite()) {
            return Err(Error::InvalidOption(format!(
                "plot dimensions must be positive, got {}x{}",
                self.width, self.height
            )));
        }
        Ok(())
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Fixed-precision coordinate; `-0.000` is normalized to `0.000`.
fn c(x: f64) -> String {
    let s = format!("{x:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

fn open(out: &mut String, w: f64, h: f64) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="Helvetica, Arial, sans-serif" font-size="12">"#,
        w = c(w),
        h = c(h)
    );
    out.push('\n');
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{}" height="{}" fill="white"/>"#, c(w), c(h));
}

fn text(out: &mut String, x: f64, y: f64, anchor: &str, extra: &str, body: &str) {
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="{anchor}"{extra}>{}</text>"#,
        c(x),
        c(y),
        escape(body)
    );
}

fn line(out: &mut String, x1: f64, y1: f64, x2: f64, y2: f64, class: &str) {
    let _ = writeln!(
        out,
        r#"<line class="{class}" x1="{}" y1="{}" x2="{}" y2="{}" stroke="black" stroke-width="1"/>"#,
        c(x1),
        c(y1),
        c(x2),
        c(y2)
    );
}

fn polyline(out: &mut String, pts: &[(f64, f64)], class: &str, color: &str, dashed: bool) {
    let mut d = String::new();
    for (k, (x, y)) in pts.iter().enumerate() {
        let _ = write!(d, "{}{},{}", if k == 0 { "M" } else { " L" }, c(*x), c(*y));
    }
    let dash = if dashed {
        format!(r#" stroke-dasharray="{DASH}""#)
    } else {
        String::new()
    };
    let _ = writeln!(
        out,
        r#"<path class="{class}" d="{d}" fill="none" stroke="{color}" stroke-width="{}"{dash}/>"#,
        if dashed { "1.5" } else { "2" }
    );
}

fn circle(out: &mut String, x: f64, y: f64, r: f64) {
    let _ = writeln!(
        out,
        r#"<circle cx="{}" cy="{}" r="{}" fill="none" stroke="{POINT_COLOR}" stroke-width="1.2"/>"#,
        c(x),
        c(y),
        c(r)
    );
}

/// Round tick steps (1, 2 or 5 times a power of ten) covering `[lo, hi]`.
pub fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    let raw = (hi - lo) / target.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).floor() as i64;
    let last = (hi / step).ceil() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    let s = format!("{:.6}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

/// Linear map from data ranges onto a pixel rectangle (y grows downward).
#[derive(Debug, Clone, Copy, PartialEq)]
struct Frame {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x0) / (self.x1 - self.x0) * self.width
    }
    fn py(&self, y: f64) -> f64 {
        self.top + self.height - (y - self.y0) / (self.y1 - self.y0) * self.height
    }
    fn map(&self, p: (f64, f64)) -> (f64, f64) {
        (self.px(p.0), self.py(p.1))
    }

    fn axes(&self, out: &mut String, xt: &[f64], yt: &[f64], labels: bool) {
        let bottom = self.top + self.height;
        line(out, self.left, bottom, self.left + self.width, bottom, "axis");
        line(out, self.left, self.top, self.left, bottom, "axis");
        for &t in xt {
            let x = self.px(t);
            line(out, x, bottom, x, bottom + 4.0, "tick");
            if labels {
                text(out, x, bottom + 16.0, "middle", "", &tick_label(t));
            }
        }
        for &t in yt {
            let y = self.py(t);
            line(out, self.left - 4.0, y, self.left, y, "tick");
            if labels {
                text(out, self.left - 7.0, y + 4.0, "end", "", &tick_label(t));
            }
        }
    }
}

/// `(I, P)` vertices in data coordinates.
pub type Polyline = Vec<(f64, f64)>;

/// What [`render_single`] draws, in data units.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleGeometry {
    pub points: Vec<(f64, f64)>,
    pub curve_irradiance: Vec<f64>,
    /// Exactly `model.evaluate_grid(params, curve_irradiance)`.
    pub curve_rate: Vec<f64>,
    /// `(lower, upper)` band limits.
    pub band: Option<(Polyline, Polyline)>,
}

pub fn single_geometry(
    data: &Dataset,
    fit: &FitResult,
    band: Option<&PredictionBand>,
    spec: &PlotSpec,
) -> Result<SingleGeometry> {
    if data.is_empty() {
        return Err(Error::Empty("cannot plot an empty dataset"));
    }
    let grid = high_res_grid(data, CURVE_POINTS)?;
    let curve = fit.model.evaluate_grid(&fit.params, &grid)?;
    let band = match band.filter(|_| spec.show_ci) {
        Some(b) => {
            let hi = data.max_irradiance() * (1.0 + 1e-12);
            if b.grid.iter().any(|&g| g < 0.0 || g > hi) {
                return Err(Error::InvalidGrid);
            }
            let lower = b.grid.iter().copied().zip(b.lower.iter().copied()).collect();
            let upper = b.grid.iter().copied().zip(b.upper.iter().copied()).collect();
            Some((lower, upper))
        }
        None => None,
    };
    Ok(SingleGeometry {
        points: data.irradiance.iter().copied().zip(data.rate.iter().copied()).collect(),
        curve_irradiance: grid,
        curve_rate: curve,
        band,
    })
}

/// Observations, fitted curve, and (when `spec.show_ci`) dashed band limits.
pub fn render_single(
    data: &Dataset,
    fit: &FitResult,
    band: Option<&PredictionBand>,
    spec: &PlotSpec,
) -> Result<String> {
    spec.check()?;
    let g = single_geometry(data, fit, band, spec)?;
    let mut ys: Vec<f64> = g.points.iter().map(|p| p.1).chain(g.curve_rate.iter().copied()).collect();
    if let Some((lo, hi)) = &g.band {
        ys.extend(lo.iter().chain(hi).map(|p| p.1));
    }
    let ys: Vec<f64> = ys.into_iter().filter(|y| y.is_finite()).collect();
    let ymin = ys.iter().copied().fold(0.0f64, f64::min);
    let ymax = ys.iter().copied().fold(0.0f64, f64::max);
    let xt = nice_ticks(0.0, data.max_irradiance(), 5);
    let yt = nice_ticks(ymin, ymax, 5);

    let frame = Frame {
        left: 70.0,
        top: 40.0,
        width: spec.width - 100.0,
        height: spec.height - 100.0,
        x0: xt[0],
        x1: *xt.last().unwrap(),
        y0: yt[0],
        y1: *yt.last().unwrap(),
    };
    let mut out = String::new();
    open(&mut out, spec.width, spec.height);
    let title = if spec.title.is_empty() {
        format!("{} — {}", data.id, fit.model)
    } else {
        spec.title.clone()
    };
    text(&mut out, spec.width / 2.0, 22.0, "middle", r#" font-size="15""#, &title);
    frame.axes(&mut out, &xt, &yt, true);
    text(&mut out, frame.left + frame.width / 2.0, spec.height - 18.0, "middle", "", &spec.x_label);
    let yl = format!(r#" transform="rotate(-90 18 {})""#, c(frame.top + frame.height / 2.0));
    text(&mut out, 18.0, frame.top + frame.height / 2.0, "middle", &yl, &spec.y_label);

    out.push_str("<g class=\"observations\">\n");
    for &p in &g.points {
        let (x, y) = frame.map(p);
        circle(&mut out, x, y, 3.5);
    }
    out.push_str("</g>\n");
    let curve: Vec<(f64, f64)> = g
        .curve_irradiance
        .iter()
        .zip(&g.curve_rate)
        .map(|(&x, &y)| frame.map((x, y)))
        .collect();
    polyline(&mut out, &curve, "fit", FIT_COLOR, false);
    if let Some((lo, hi)) = &g.band {
        let lo: Vec<_> = lo.iter().map(|&p| frame.map(p)).collect();
        let hi: Vec<_> = hi.iter().map(|&p| frame.map(p)).collect();
        polyline(&mut out, &lo, "band-lower", BAND_COLOR, true);
        polyline(&mut out, &hi, "band-upper", BAND_COLOR, true);
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// One panel of [`render_panel_grid`], in plotted (possibly normalized) units.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelGeometry {
    pub model: ModelId,
    /// `None` when the response is constant.
    pub r2: Option<f64>,
    /// Free parameters of the fit.
    pub k: usize,
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub curve: Vec<(f64, f64)>,
}

/// `R² = x.xxx, p = k`, with the decimal rounded half to even.
pub fn panel_label(r2: Option<f64>, k: usize) -> String {
    match r2 {
        Some(r) => format!("R² = {r:.3}, p = {k}"),
        None => format!("R² = n/a, p = {k}"),
    }
}

/// Panels for every converged fit, best R² first.
pub fn panel_grid_geometry(data: &Dataset, fits: &[FitResult], spec: &PlotSpec) -> Result<Vec<PanelGeometry>> {
    let mut usable: Vec<(&FitResult, Option<f64>)> = fits
        .iter()
        .filter(|f| f.converged)
        .map(|f| (f, r_squared_from_sse(f.sse, &data.rate, f.k).ok().map(|r| r.r2)))
        .collect();
    if usable.is_empty() {
        return Err(Error::Empty("panel grid needs at least one converged fit"));
    }
    usable.sort_by(|a, b| {
        let key = |x: &(&FitResult, Option<f64>)| x.1.unwrap_or(-x.0.sse);
        key(b).total_cmp(&key(a)).then(a.0.k.cmp(&b.0.k)).then(a.0.model.cmp(&b.0.model))
    });
    let grid = high_res_grid(data, CURVE_POINTS)?;
    let (sx, sy) = if spec.normalize_axes {
        let my = data.rate.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        (data.max_irradiance(), if my > 0.0 { my } else { 1.0 })
    } else {
        (1.0, 1.0)
    };
    let norm = |(x, y): (f64, f64)| {
        if spec.normalize_axes {
            ((x / sx).clamp(0.0, NORMALIZED_MAX), (y / sy).clamp(0.0, NORMALIZED_MAX))
        } else {
            (x, y)
        }
    };
    usable
        .into_iter()
        .map(|(f, r2)| {
            let curve = f.model.evaluate_grid(&f.params, &grid)?;
            Ok(PanelGeometry {
                model: f.model,
                r2,
                k: f.k,
                label: panel_label(r2, f.k),
                points: data
                    .irradiance
                    .iter()
                    .zip(&data.rate)
                    .map(|(&x, &y)| norm((x, y)))
                    .collect(),
                curve: grid.iter().zip(curve).map(|(&x, y)| norm((x, y))).collect(),
            })
        })
        .collect()
}

/// One small panel per converged fit, sorted from highest to lowest R².
pub fn render_panel_grid(data: &Dataset, fits: &[FitResult], spec: &PlotSpec) -> Result<String> {
    spec.check()?;
    let panels = panel_grid_geometry(data, fits, spec)?;
    let n = panels.len();
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    let header = 40.0;
    let cw = spec.width / cols as f64;
    let ch = (spec.height - header) / rows as f64;

    let (xt, yt, x1, y1) = if spec.normalize_axes {
        let t = vec![0.0, 0.5, 1.0];
        (t.clone(), t, NORMALIZED_MAX, NORMALIZED_MAX)
    } else {
        let ys = panels.iter().flat_map(|p| p.points.iter().chain(&p.curve).map(|q| q.1));
        let ymax = ys.clone().filter(|y| y.is_finite()).fold(0.0f64, f64::max);
        let ymin = ys.filter(|y| y.is_finite()).fold(0.0f64, f64::min);
        let xt = nice_ticks(0.0, data.max_irradiance(), 3);
        let yt = nice_ticks(ymin, ymax, 3);
        let (x1, y1) = (*xt.last().unwrap(), *yt.last().unwrap());
        (xt, yt, x1, y1)
    };
    let y0 = yt[0];

    let mut out = String::new();
    open(&mut out, spec.width, spec.height);
    let title = if spec.title.is_empty() {
        format!("{} — {} models by R²", data.id, n)
    } else {
        spec.title.clone()
    };
    text(&mut out, spec.width / 2.0, 26.0, "middle", r#" font-size="15""#, &title);
    for (idx, p) in panels.iter().enumerate() {
        let (col, row) = (idx % cols, idx / cols);
        let frame = Frame {
            left: col as f64 * cw + 42.0,
            top: header + row as f64 * ch + 24.0,
            width: (cw - 58.0).max(1.0),
            height: (ch - 50.0).max(1.0),
            x0: 0.0,
            x1,
            y0,
            y1,
        };
        let _ = writeln!(out, r#"<g class="panel" data-model="{}">"#, p.model);
        text(&mut out, frame.left, frame.top - 8.0, "start", r#" font-weight="bold""#, p.model.as_str());
        text(&mut out, frame.left + frame.width, frame.top - 8.0, "end", r#" class="annotation""#, &p.label);
        frame.axes(&mut out, &xt, &yt, true);
        for &q in &p.points {
            let (x, y) = frame.map(q);
            circle(&mut out, x, y, 2.5);
        }
        let curve: Vec<_> = p.curve.iter().map(|&q| frame.map(q)).collect();
        polyline(&mut out, &curve, "fit", FIT_COLOR, false);
        out.push_str("</g>\n");
    }
    text(&mut out, spec.width / 2.0, spec.height - 6.0, "middle", "", &spec.x_label);
    out.push_str("</svg>\n");
    Ok(out)
}

/// Percentages to one decimal that add up to exactly 100.0 (largest
/// remainder on tenths of a percent).
pub fn rounded_percentages(frequencies: &[f64]) -> Vec<f64> {
    let total: f64 = frequencies.iter().sum();
    if !(total > 0.0) {
        return vec![0.0; frequencies.len()];
    }
    let exact: Vec<f64> = frequencies.iter().map(|f| f / total * 1000.0).collect();
    let mut tenths: Vec<i64> = exact.iter().map(|e| e.floor() as i64).collect();
    let mut short = 1000 - tenths.iter().sum::<i64>();
    let mut order: Vec<usize> = (0..exact.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    for &i in order.iter().cycle().take(exact.len() * 2) {
        if short <= 0 {
            break;
        }
        tenths[i] += 1;
        short -= 1;
    }
    tenths.into_iter().map(|t| t as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarGeometry {
    pub class: ModelClass,
    pub frequency: f64,
    /// Bar height in pixels; frequency 1 fills the plot height.
    pub height: f64,
    pub percent: f64,
}

fn class_color(c: ModelClass) -> &'static str {
    match c {
        ModelClass::LightLimited => "#4daf4a",
        ModelClass::LightSaturated => "#377eb8",
        ModelClass::Photoinhibited => "#e41a1c",
    }
}

pub fn class_frequency_geometry(summary: &ClassSummary, spec: &PlotSpec) -> Result<Vec<BarGeometry>> {
    if summary.classified() == 0 {
        return Err(Error::Empty("no successful classifications to plot"));
    }
    let plot_h = spec.height - 110.0;
    let freqs: Vec<f64> = ModelClass::ALL.iter().map(|&c| summary.frequency(c)).collect();
    let pct = rounded_percentages(&freqs);
    Ok(ModelClass::ALL
        .iter()
        .zip(freqs)
        .zip(pct)
        .map(|((&class, frequency), percent)| BarGeometry {
            class,
            frequency,
            height: frequency * plot_h,
            percent,
        })
        .collect())
}

/// Bar chart of relative class frequencies; empty classes draw no bar.
pub fn render_class_frequency(summary: &ClassSummary, spec: &PlotSpec) -> Result<String> {
    spec.check()?;
    let bars = class_frequency_geometry(summary, spec)?;
    let left = 70.0;
    let top = 50.0;
    let plot_w = spec.width - 100.0;
    let plot_h = spec.height - 110.0;
    let frame = Frame {
        left,
        top,
        width: plot_w,
        height: plot_h,
        x0: 0.0,
        x1: 1.0,
        y0: 0.0,
        y1: 1.0,
    };
    let mut out = String::new();
    open(&mut out, spec.width, spec.height);
    let title = if spec.title.is_empty() {
        format!("Curve types (n = {})", summary.classified())
    } else {
        spec.title.clone()
    };
    text(&mut out, spec.width / 2.0, 26.0, "middle", r#" font-size="15""#, &title);
    frame.axes(&mut out, &[], &[0.0, 0.25, 0.5, 0.75, 1.0], true);
    let slot = plot_w / bars.len() as f64;
    let bottom = top + plot_h;
    for (k, b) in bars.iter().enumerate() {
        let x = left + slot * (k as f64 + 0.2);
        let w = slot * 0.6;
        if b.frequency > 0.0 {
            let _ = writeln!(
                out,
                r#"<rect class="bar" data-class="{}" x="{}" y="{}" width="{}" height="{}" fill="{}"/>"#,
                b.class,
                c(x),
                c(bottom - b.height),
                c(w),
                c(b.height),
                class_color(b.class)
            );
        }
        text(&mut out, x + w / 2.0, bottom - b.height - 6.0, "middle", r#" class="percent""#, &format!("{:.1}%", b.percent));
        text(&mut out, x + w / 2.0, bottom + 18.0, "middle", "", b.class.as_str());
    }
    text(&mut out, left + plot_w / 2.0, spec.height - 12.0, "middle", "", &spec.x_label);
    let yl = format!(r#" transform="rotate(-90 18 {})""#, c(top + plot_h / 2.0));
    text(&mut out, 18.0, top + plot_h / 2.0, "middle", &yl, &spec.y_label);
    out.push_str("</svg>\n");
    Ok(out)
}
