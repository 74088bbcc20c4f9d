//! Standalone SVG figures: scatter maps and the ρ_avg curve.
//!
//! The plot area is a `<rect class="plot-area">` whose `data-*` attributes
//! carry the data-space bounds, so a reader can invert the axis transform:
//!
//! ```text
//! x = data-xmin + (px - data-left) / data-width  * (data-xmax - data-xmin)
//! y = data-ymax - (py - data-top)  / data-height * (data-ymax - data-ymin)
//! ```
//!
//! For the ρ curve the horizontal data unit is seconds since the first
//! history entry.

use std::fmt::Write as _;

use chrono::NaiveDateTime;

use crate::error::{Error, Result};
use crate::rtdt::{AlertEvent, RhoAverage};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 64.0;
const TOP: f64 = 40.0;
const PLOT_W: f64 = 544.0;
const PLOT_H: f64 = 384.0;
const MARKER_RADIUS: f64 = 3.0;

/// Two-colour temporal gradient, earliest to latest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColorScale {
    pub start: [u8; 3],
    pub end: [u8; 3],
}

impl Default for ColorScale {
    fn default() -> Self {
        Self {
            start: [0x1f, 0x77, 0xb4],
            end: [0xd6, 0x27, 0x28],
        }
    }
}

impl ColorScale {
    /// Hex colour at `t` in `[0, 1]`.
    pub fn at(&self, t: f64) -> String {
        let t = t.clamp(0.0, 1.0);
        let mix = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * t).round() as u8;
        format!(
            "#{:02x}{:02x}{:02x}",
            mix(self.start[0], self.end[0]),
            mix(self.start[1], self.end[1]),
            mix(self.start[2], self.end[2])
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapPoint {
    pub x: f64,
    pub y: f64,
    pub timestamp: NaiveDateTime,
}

/// A labelled cross drawn on top of the scatter.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub x: f64,
    pub y: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MapFigureSpec {
    pub title: String,
    pub points: Vec<MapPoint>,
    /// Indices drawn with a dark outline, e.g. the reference set.
    pub highlight: Vec<usize>,
    /// Draw the time-ordered polyline through all points.
    pub trajectory: bool,
    pub color_scale: ColorScale,
    pub annotations: Vec<Annotation>,
}

impl MapFigureSpec {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if let Some(i) = self
            .points
            .iter()
            .position(|p| !(p.x.is_finite() && p.y.is_finite()))
        {
            problems.push(format!("points[{i}] has a non-finite coordinate"));
        }
        if let Some(i) = self
            .annotations
            .iter()
            .position(|a| !(a.x.is_finite() && a.y.is_finite()))
        {
            problems.push(format!("annotations[{i}] has a non-finite coordinate"));
        }
        if let Some(&h) = self.highlight.iter().find(|&&h| h >= self.points.len()) {
            problems.push(format!("highlight index {h} out of range"));
        }
        if self.trajectory {
            if let Some(i) = self
                .points
                .windows(2)
                .position(|w| w[1].timestamp < w[0].timestamp)
            {
                problems.push(format!("points[{}] is earlier than its predecessor", i + 1));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Axes {
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
}

impl Axes {
    fn fit(xs: impl Iterator<Item = f64>, ys: impl Iterator<Item = f64>) -> Self {
        let (xmin, xmax) = padded(xs);
        let (ymin, ymax) = padded(ys);
        Self {
            xmin,
            xmax,
            ymin,
            ymax,
        }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.xmin) / (self.xmax - self.xmin) * PLOT_W
    }

    fn py(&self, y: f64) -> f64 {
        TOP + (self.ymax - y) / (self.ymax - self.ymin) * PLOT_H
    }
}

fn padded(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    let span = hi - lo;
    if span > 0.0 {
        (lo - 0.05 * span, hi + 0.05 * span)
    } else {
        let half = if lo == 0.0 { 1.0 } else { 0.5 * lo.abs() };
        (lo - half, hi + half)
    }
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            // Not representable in XML 1.0, even as a character reference.
            '\u{0}'..='\u{8}'
            | '\u{b}'
            | '\u{c}'
            | '\u{e}'..='\u{1f}'
            | '\u{fffe}'
            | '\u{ffff}' => out.push('\u{fffd}'),
            _ => out.push(c),
        }
    }
    out
}

fn open_document(out: &mut String, title: &str, axes: &Axes, x_label: &str, y_label: &str) {
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        out,
        r#"<rect class="background" x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        out,
        r##"<rect class="plot-area" x="{LEFT}" y="{TOP}" width="{PLOT_W}" height="{PLOT_H}" fill="none" stroke="#444" data-xmin="{}" data-xmax="{}" data-ymin="{}" data-ymax="{}" data-left="{LEFT}" data-top="{TOP}" data-width="{PLOT_W}" data-height="{PLOT_H}"/>"##,
        axes.xmin, axes.xmax, axes.ymin, axes.ymax
    );
    let _ = writeln!(
        out,
        r#"<text class="title" x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        LEFT + PLOT_W / 2.0,
        escape(title)
    );
    let bottom = TOP + PLOT_H;
    let right = LEFT + PLOT_W;
    let tick = |v: f64| format!("{v:.3}");
    let _ = writeln!(
        out,
        r##"<g class="axis-labels" font-family="sans-serif" font-size="10" fill="#444">
<text x="{LEFT}" y="{}" text-anchor="start">{}</text>
<text x="{right}" y="{}" text-anchor="end">{}</text>
<text x="{}" y="{bottom}" text-anchor="end">{}</text>
<text x="{}" y="{}" text-anchor="end">{}</text>
<text x="{}" y="{}" text-anchor="middle">{}</text>
<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>
</g>"##,
        bottom + 14.0,
        tick(axes.xmin),
        bottom + 14.0,
        tick(axes.xmax),
        LEFT - 4.0,
        tick(axes.ymin),
        LEFT - 4.0,
        TOP + 10.0,
        tick(axes.ymax),
        LEFT + PLOT_W / 2.0,
        bottom + 32.0,
        escape(x_label),
        TOP + PLOT_H / 2.0,
        TOP + PLOT_H / 2.0,
        escape(y_label)
    );
}

/// Scatter map with one `<circle>` per point, coloured by time.
pub fn render_map(spec: &MapFigureSpec) -> Result<String> {
    spec.validate()?;
    let xs = spec
        .points
        .iter()
        .map(|p| p.x)
        .chain(spec.annotations.iter().map(|a| a.x));
    let ys = spec
        .points
        .iter()
        .map(|p| p.y)
        .chain(spec.annotations.iter().map(|a| a.y));
    let axes = Axes::fit(xs, ys);

    let mut out = String::new();
    open_document(&mut out, &spec.title, &axes, "x", "y");

    if spec.trajectory && !spec.points.is_empty() {
        let vertices: Vec<String> = spec
            .points
            .iter()
            .map(|p| format!("{},{}", axes.px(p.x), axes.py(p.y)))
            .collect();
        let _ = writeln!(
            out,
            r##"<polyline class="trajectory" fill="none" stroke="#999" stroke-width="0.8" points="{}"/>"##,
            vertices.join(" ")
        );
    }

    let (t0, t1) = match (
        spec.points.iter().map(|p| p.timestamp).min(),
        spec.points.iter().map(|p| p.timestamp).max(),
    ) {
        (Some(a), Some(b)) => (a, b),
        _ => (NaiveDateTime::MIN, NaiveDateTime::MIN),
    };
    let span = (t1 - t0).num_milliseconds() as f64;
    let mut highlighted = vec![false; spec.points.len()];
    spec.highlight.iter().for_each(|&h| highlighted[h] = true);

    let _ = writeln!(out, r#"<g class="points">"#);
    for (i, p) in spec.points.iter().enumerate() {
        let t = if span > 0.0 {
            (p.timestamp - t0).num_milliseconds() as f64 / span
        } else {
            0.0
        };
        let stroke = if highlighted[i] {
            r#" stroke="black" stroke-width="1""#
        } else {
            ""
        };
        let _ = writeln!(
            out,
            r#"<circle class="{}" cx="{}" cy="{}" r="{MARKER_RADIUS}" fill="{}"{stroke}/>"#,
            if highlighted[i] {
                "point highlight"
            } else {
                "point"
            },
            axes.px(p.x),
            axes.py(p.y),
            spec.color_scale.at(t)
        );
    }
    let _ = writeln!(out, "</g>");

    for a in &spec.annotations {
        let (cx, cy) = (axes.px(a.x), axes.py(a.y));
        let _ = writeln!(
            out,
            r#"<g class="annotation"><path d="M{} {}L{} {}M{} {}L{} {}" stroke="black" stroke-width="2"/><text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text></g>"#,
            cx - 6.0,
            cy - 6.0,
            cx + 6.0,
            cy + 6.0,
            cx - 6.0,
            cy + 6.0,
            cx + 6.0,
            cy - 6.0,
            cx + 8.0,
            cy - 8.0,
            escape(&a.label)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// ρ_avg against time with a horizontal threshold line and one marker per
/// alert.
pub fn render_rho_curve(
    history: &[RhoAverage],
    threshold: f64,
    alerts: &[AlertEvent],
) -> Result<String> {
    let mut problems = Vec::new();
    if history.is_empty() {
        problems.push("history is empty".to_string());
    }
    if !threshold.is_finite() {
        problems.push("threshold is not finite".to_string());
    }
    if let Some(i) = history.iter().position(|h| !h.rho_avg.is_finite()) {
        problems.push(format!("history[{i}] is not finite"));
    }
    if let Some(i) = history
        .windows(2)
        .position(|w| w[1].timestamp <= w[0].timestamp)
    {
        problems.push(format!("history[{}] is not after its predecessor", i + 1));
    }
    if let Some(i) = alerts.iter().position(|a| !a.rho_avg.is_finite()) {
        problems.push(format!("alerts[{i}] is not finite"));
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }

    let t0 = history[0].timestamp;
    let secs = |t: NaiveDateTime| (t - t0).num_milliseconds() as f64 / 1000.0;
    let xs = history
        .iter()
        .map(|h| secs(h.timestamp))
        .chain(alerts.iter().map(|a| secs(a.timestamp)));
    let ys = history
        .iter()
        .map(|h| h.rho_avg)
        .chain(alerts.iter().map(|a| a.rho_avg))
        .chain([0.0, threshold]);
    let axes = Axes::fit(xs, ys);

    let mut out = String::new();
    let title = format!("rho_avg from {}", t0.format("%Y-%m-%d %H:%M:%S"));
    open_document(&mut out, &title, &axes, "seconds", "rho_avg");

    let ty = axes.py(threshold);
    let _ = writeln!(
        out,
        r##"<line class="threshold" x1="{LEFT}" y1="{ty}" x2="{}" y2="{ty}" stroke="#d62728" stroke-dasharray="6 4" data-value="{threshold}"/>"##,
        LEFT + PLOT_W
    );
    let vertices: Vec<String> = history
        .iter()
        .map(|h| format!("{},{}", axes.px(secs(h.timestamp)), axes.py(h.rho_avg)))
        .collect();
    let _ = writeln!(
        out,
        r##"<polyline class="rho" fill="none" stroke="#1f77b4" stroke-width="1.2" points="{}"/>"##,
        vertices.join(" ")
    );
    for a in alerts {
        let _ = writeln!(
            out,
            r##"<circle class="alert" cx="{}" cy="{}" r="5" fill="none" stroke="#d62728" stroke-width="2" data-timestamp="{}"/>"##,
            axes.px(secs(a.timestamp)),
            axes.py(a.rho_avg),
            a.timestamp.format("%Y-%m-%dT%H:%M:%S")
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}
