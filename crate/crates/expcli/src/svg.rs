//! Minimal line and scatter plots written directly as SVG.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Style {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub width: u32,
    pub height: u32,
}

impl Default for Style {
    fn default() -> Self {
        Self { title: String::new(), x_label: "x".into(), y_label: "y".into(), width: 640, height: 400 }
    }
}

/// Step of the form `{1, 2, 5} * 10^k` giving about `target` intervals.
fn nice_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let unit = raw / mag;
    let nice = if unit <= 1.0 {
        1.0
    } else if unit <= 2.0 {
        2.0
    } else if unit <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

/// Axis range padded when degenerate.
fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi > lo {
        (lo, hi)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        (lo - pad, hi + pad)
    }
}

struct Axis {
    lo: f64,
    hi: f64,
    ticks: Vec<f64>,
    decimals: usize,
}

impl Axis {
    fn new((lo, hi): (f64, f64)) -> Self {
        let step = nice_step(hi - lo, 5.0);
        let lo = (lo / step).floor() * step;
        let hi = (hi / step).ceil() * step;
        let count = ((hi - lo) / step).round() as usize;
        let ticks = (0..=count).map(|i| lo + step * i as f64).collect();
        let decimals = (-step.log10().floor()).max(0.0) as usize;
        Self { lo, hi, ticks, decimals }
    }

    fn label(&self, v: f64) -> String {
        let s = format!("{:.*}", self.decimals, v);
        // avoid "-0.00"
        if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
            s.trim_start_matches('-').to_string()
        } else {
            s
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Renders the series as one self-contained SVG document.
pub fn render_svg(series: &[Series], style: &Style) -> Result<String> {
    let points = || series.iter().flat_map(|s| s.points.iter());
    if points().next().is_none() {
        return Err(CliError::Render("no points to plot".into()));
    }
    if let Some(s) = series.iter().find(|s| s.points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite())) {
        return Err(CliError::Render(format!("series `{}` has a non-finite point", s.label)));
    }
    let xa = Axis::new(range(points().map(|p| p.0)));
    let ya = Axis::new(range(points().map(|p| p.1)));
    let (w, h) = (style.width as f64, style.height as f64);
    let (left, right, top, bottom) = (70.0, w - 160.0, 40.0, h - 50.0);
    let sx = |x: f64| left + (x - xa.lo) / (xa.hi - xa.lo) * (right - left);
    let sy = |y: f64| bottom - (y - ya.lo) / (ya.hi - ya.lo) * (bottom - top);

    let mut o = String::new();
    let _ = writeln!(
        o,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif" font-size="12">"#,
        style.width, style.height, style.width, style.height
    );
    let _ = writeln!(o, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if !style.title.is_empty() {
        let _ = writeln!(o, r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">{}</text>"#, (left + right) / 2.0, escape(&style.title));
    }
    let _ = writeln!(o, r#"<g stroke="black" fill="none">"#);
    let _ = writeln!(o, r#"<line x1="{left:.2}" y1="{bottom:.2}" x2="{right:.2}" y2="{bottom:.2}"/>"#);
    let _ = writeln!(o, r#"<line x1="{left:.2}" y1="{bottom:.2}" x2="{left:.2}" y2="{top:.2}"/>"#);
    let _ = writeln!(o, "</g>");
    for &t in &xa.ticks {
        let x = sx(t);
        let _ = writeln!(o, r#"<line x1="{x:.2}" y1="{bottom:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, bottom + 5.0);
        let _ = writeln!(o, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, bottom + 18.0, xa.label(t));
    }
    for &t in &ya.ticks {
        let y = sy(t);
        let _ = writeln!(o, r#"<line x1="{:.2}" y1="{y:.2}" x2="{left:.2}" y2="{y:.2}" stroke="black"/>"#, left - 5.0);
        let _ = writeln!(o, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, left - 8.0, y + 4.0, ya.label(t));
    }
    let _ = writeln!(o, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, (left + right) / 2.0, h - 12.0, escape(&style.x_label));
    let _ = writeln!(
        o,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        (top + bottom) / 2.0,
        (top + bottom) / 2.0,
        escape(&style.y_label)
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if s.points.len() > 1 {
            let path: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(o, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
        }
        for &(x, y) in &s.points {
            let _ = writeln!(o, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(x), sy(y));
        }
        let ly = top + 10.0 + 18.0 * i as f64;
        let _ = writeln!(o, r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#, right + 15.0, right + 35.0);
        let _ = writeln!(o, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, right + 40.0, ly + 4.0, escape(&s.label));
    }
    o.push_str("</svg>\n");
    Ok(o)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(label: &str, points: Vec<(f64, f64)>) -> Vec<Series> {
        vec![Series { label: label.into(), points }]
    }

    #[test]
    fn single_point_has_one_marker() {
        let svg = render_svg(&one("p", vec![(0.5, 1.0)]), &Style::default()).unwrap();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<circle").count(), 1);
        assert_eq!(svg.matches("<polyline").count(), 0);
    }

    #[test]
    fn empty_and_nan_rejected() {
        assert!(render_svg(&[], &Style::default()).is_err());
        assert!(render_svg(&one("e", vec![]), &Style::default()).is_err());
        assert!(render_svg(&one("n", vec![(0.0, f64::NAN)]), &Style::default()).is_err());
    }

    #[test]
    fn ticks_are_monotone() {
        for (lo, hi) in [(0.02, 0.5), (-3.0, 7.5), (1e-4, 3e-4), (0.0, 1.0), (1.0, 1.0)] {
            let a = Axis::new(range([lo, hi].into_iter()));
            let values: Vec<f64> = a.ticks.iter().map(|&t| a.label(t).parse().unwrap()).collect();
            assert!(values.windows(2).all(|w| w[1] > w[0]), "{values:?}");
            assert!(a.lo <= lo && a.hi >= hi);
        }
    }

    #[test]
    fn byte_deterministic_and_escaped() {
        let s = vec![
            Series { label: "lhs <x>".into(), points: vec![(0.1, 0.2), (0.2, 0.3)] },
            Series { label: "rhs".into(), points: vec![(0.1, 0.5), (0.2, 0.6)] },
        ];
        let a = render_svg(&s, &Style::default()).unwrap();
        assert_eq!(a, render_svg(&s, &Style::default()).unwrap());
        assert!(a.contains("lhs &lt;x&gt;"));
    }
}
