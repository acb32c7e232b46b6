//! Deterministic SVG 1.1 rendering of a dataset with an optional fitted curve.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::analyze::IntervalBand;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::models::Model;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PlotOptions {
    pub width: f64,
    pub height: f64,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Number of samples along the fitted curve.
    pub curve_points: usize,
}

impl Default for PlotOptions {
    fn default() -> Self {
        PlotOptions {
            width: 800.0,
            height: 500.0,
            title: String::new(),
            x_label: "age (years)".into(),
            y_label: "y".into(),
            curve_points: 400,
        }
    }
}

pub struct Curve<'a> {
    pub spec: &'a dyn Model,
    pub params: &'a [f64],
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    left: f64,
    right: f64,
    top: f64,
    bottom: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x0) / (self.x1 - self.x0) * (self.right - self.left)
    }

    fn py(&self, y: f64) -> f64 {
        self.bottom - (y - self.y0) / (self.y1 - self.y0) * (self.bottom - self.top)
    }

    fn inside(&self, y: f64) -> bool {
        y.is_finite() && y >= self.y0 && y <= self.y1
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

/// Renders the scatter (one `<circle>` per point, colored per study), the
/// fitted curve as a single `<path>`, and the band as a `<polygon>`.
pub fn render_svg(
    d: &Dataset,
    curve: Option<Curve<'_>>,
    band: Option<&IntervalBand>,
    opts: &PlotOptions,
) -> Result<String> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let xs = d.xs();
    let ys = d.ys();
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (x0, x1) = padded(min(&xs), max(&xs));
    let mut y_lo = min(&ys);
    let mut y_hi = max(&ys);
    if let Some(b) = band {
        y_lo = y_lo.min(min(&b.lower));
        y_hi = y_hi.max(max(&b.upper));
    }
    let (y0, y1) = padded(y_lo, y_hi);
    let f = Frame {
        x0,
        x1,
        y0,
        y1,
        left: 70.0,
        right: opts.width - 20.0,
        top: 40.0,
        bottom: opts.height - 50.0,
    };

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{:.0}" height="{:.0}" viewBox="0 0 {:.0} {:.0}">"#,
        opts.width, opts.height, opts.width, opts.height
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{:.0}" height="{:.0}" fill="white"/>"#,
        opts.width, opts.height
    );
    if !opts.title.is_empty() {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
            opts.width / 2.0,
            escape(&opts.title)
        );
    }

    // axes and ticks
    let _ = writeln!(
        s,
        r#"<g stroke="black" stroke-width="1"><line x1="{l:.2}" y1="{b:.2}" x2="{r:.2}" y2="{b:.2}"/><line x1="{l:.2}" y1="{t:.2}" x2="{l:.2}" y2="{b:.2}"/></g>"#,
        l = f.left,
        r = f.right,
        t = f.top,
        b = f.bottom
    );
    let _ = writeln!(s, r#"<g font-family="sans-serif" font-size="11">"#);
    for i in 0..=5 {
        let xv = x0 + (x1 - x0) * i as f64 / 5.0;
        let yv = y0 + (y1 - y0) * i as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            f.px(xv),
            f.bottom + 16.0,
            tick(xv)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            f.left - 6.0,
            f.py(yv) + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13">{}</text>"#,
        (f.left + f.right) / 2.0,
        opts.height - 12.0,
        escape(&opts.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" font-size="13" transform="rotate(-90 16 {:.2})">{}</text>"#,
        (f.top + f.bottom) / 2.0,
        (f.top + f.bottom) / 2.0,
        escape(&opts.y_label)
    );
    let _ = writeln!(s, "</g>");

    if let Some(b) = band {
        let mut pts = String::new();
        let upper = b.x.iter().zip(&b.upper);
        let lower = b.x.iter().zip(&b.lower).rev();
        for (x, y) in upper.chain(lower) {
            let _ = write!(pts, "{:.2},{:.2} ", f.px(*x), f.py(*y));
        }
        let _ = writeln!(
            s,
            r##"<polygon class="band" points="{}" fill="#999999" fill-opacity="0.25" stroke="none"/>"##,
            pts.trim_end()
        );
    }

    let colors: BTreeMap<&str, &str> = d
        .studies()
        .keys()
        .enumerate()
        .map(|(i, k)| (k.as_str(), PALETTE[i % PALETTE.len()]))
        .collect();
    let _ = writeln!(s, r#"<g class="points" fill-opacity="0.7">"#);
    for p in d.points() {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#,
            f.px(p.x),
            f.py(p.y),
            colors[p.study_id.as_str()]
        );
    }
    let _ = writeln!(s, "</g>");

    if let Some(c) = curve {
        let n = opts.curve_points.max(2);
        let mut path = String::new();
        let mut pen_down = false;
        for i in 0..n {
            let x = x0 + (x1 - x0) * i as f64 / (n - 1) as f64;
            let y = c.spec.eval(c.params, x);
            if f.inside(y) {
                let _ = write!(
                    path,
                    "{}{:.2},{:.2} ",
                    if pen_down { "L" } else { "M" },
                    f.px(x),
                    f.py(y)
                );
                pen_down = true;
            } else {
                pen_down = false;
            }
        }
        let _ = writeln!(
            s,
            r#"<path class="fit" d="{}" fill="none" stroke="black" stroke-width="2"/>"#,
            path.trim_end()
        );
    }

    // legend
    let _ = writeln!(s, r#"<g class="legend" font-family="sans-serif" font-size="11">"#);
    for (i, (study, color)) in colors.iter().enumerate() {
        let y = f.top + 14.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="8" height="8" fill="{}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            f.right - 150.0,
            y,
            color,
            f.right - 138.0,
            y + 8.0,
            escape(study)
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, "</svg>");
    Ok(s)
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-2..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}
