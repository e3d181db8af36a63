//! Minimal deterministic SVG rendering: fixed canvas, fixed formatting, no
//! timestamps or randomness, so identical inputs produce identical bytes.

use std::path::Path;

use crate::error::{CliError, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const ML: f64 = 56.0;
const MR: f64 = 16.0;
const MT: f64 = 30.0;
const MB: f64 = 42.0;

pub const PALETTE: [&str; 6] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// One named point set; the renderer assigns palette colors in order.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series { label: label.into(), points }
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn from_points<'a>(points: impl Iterator<Item = &'a (f64, f64)>, square: bool) -> Frame {
        let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in points {
            if x.is_finite() && y.is_finite() {
                x0 = x0.min(x);
                x1 = x1.max(x);
                y0 = y0.min(y);
                y1 = y1.max(y);
            }
        }
        if !(x0.is_finite() && y0.is_finite()) {
            return Frame { x0: -1.0, x1: 1.0, y0: -1.0, y1: 1.0 };
        }
        let pad = |lo: &mut f64, hi: &mut f64| {
            let span = *hi - *lo;
            if span <= 0.0 {
                *lo -= 1.0;
                *hi += 1.0;
            } else {
                *lo -= 0.05 * span;
                *hi += 0.05 * span;
            }
        };
        pad(&mut x0, &mut x1);
        pad(&mut y0, &mut y1);
        if square {
            let cx = 0.5 * (x0 + x1);
            let cy = 0.5 * (y0 + y1);
            let half = 0.5 * (x1 - x0).max(y1 - y0);
            (x0, x1) = (cx - half, cx + half);
            (y0, y1) = (cy - half, cy + half);
        }
        Frame { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        ML + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - ML - MR)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MB - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - MT - MB)
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if v != 0.0 && (a >= 1e4 || a < 1e-2) {
        return format!("{v:.1e}");
    }
    let mut s = format!("{v:.3}");
    while s.ends_with('0') {
        s.pop();
    }
    if s.ends_with('.') {
        s.pop();
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"monospace\" font-size=\"12\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        WIDTH / 2.0,
        esc(title)
    )
}

fn axes(out: &mut String, frame: &Frame, x_label: &str, y_label: &str) {
    out.push_str(&format!(
        "<rect x=\"{ML}\" y=\"{MT}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"#444\"/>\n",
        WIDTH - ML - MR,
        HEIGHT - MT - MB
    ));
    for i in 0..=4u32 {
        let f = f64::from(i) / 4.0;
        let xv = frame.x0 + f * (frame.x1 - frame.x0);
        let yv = frame.y0 + f * (frame.y1 - frame.y0);
        let xp = frame.px(xv);
        let yp = frame.py(yv);
        out.push_str(&format!(
            "<line x1=\"{xp:.2}\" y1=\"{:.1}\" x2=\"{xp:.2}\" y2=\"{:.1}\" stroke=\"#ddd\"/>\n",
            MT,
            HEIGHT - MB
        ));
        out.push_str(&format!(
            "<line x1=\"{ML}\" y1=\"{yp:.2}\" x2=\"{:.1}\" y2=\"{yp:.2}\" stroke=\"#ddd\"/>\n",
            WIDTH - MR
        ));
        out.push_str(&format!(
            "<text x=\"{xp:.2}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
            HEIGHT - MB + 16.0,
            tick_label(xv)
        ));
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>\n",
            ML - 6.0,
            yp + 4.0,
            tick_label(yv)
        ));
    }
    out.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
        ML + 0.5 * (WIDTH - ML - MR),
        HEIGHT - 8.0,
        esc(x_label)
    ));
    out.push_str(&format!(
        "<text x=\"14\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.1})\">{}</text>\n",
        MT + 0.5 * (HEIGHT - MT - MB),
        MT + 0.5 * (HEIGHT - MT - MB),
        esc(y_label)
    ));
}

fn legend(out: &mut String, series: &[Series]) {
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let y = MT + 16.0 + 15.0 * i as f64;
        out.push_str(&format!(
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\n",
            WIDTH - MR - 150.0,
            y - 9.0
        ));
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{y:.1}\">{}</text>\n",
            WIDTH - MR - 136.0,
            esc(&s.label)
        ));
    }
}

/// Point clouds on a shared square frame (equal units per axis).
pub fn scatter_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let frame = Frame::from_points(series.iter().flat_map(|s| s.points.iter()), true);
    let mut out = header(title);
    axes(&mut out, &frame, x_label, y_label);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        for &(x, y) in &s.points {
            if !(x.is_finite() && y.is_finite()) {
                continue;
            }
            out.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2\" fill=\"{color}\" fill-opacity=\"0.45\"/>\n",
                frame.px(x),
                frame.py(y)
            ));
        }
    }
    legend(&mut out, series);
    out.push_str("</svg>\n");
    out
}

/// Line plot; `log_y` plots log10 of the values and drops non-positive ones.
pub fn curves_svg(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    log_y: bool,
) -> String {
    let transformed: Vec<Series> = series
        .iter()
        .map(|s| Series {
            label: s.label.clone(),
            points: s
                .points
                .iter()
                .filter(|&&(x, y)| x.is_finite() && y.is_finite() && (!log_y || y > 0.0))
                .map(|&(x, y)| (x, if log_y { y.log10() } else { y }))
                .collect(),
        })
        .collect();
    let frame = Frame::from_points(transformed.iter().flat_map(|s| s.points.iter()), false);
    let y_label = if log_y { format!("log10 {y_label}") } else { y_label.to_string() };
    let mut out = header(title);
    axes(&mut out, &frame, x_label, &y_label);
    for (i, s) in transformed.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if s.points.is_empty() {
            continue;
        }
        let mut d = String::new();
        for (j, &(x, y)) in s.points.iter().enumerate() {
            d.push_str(if j == 0 { "M" } else { " L" });
            d.push_str(&format!("{:.2} {:.2}", frame.px(x), frame.py(y)));
        }
        out.push_str(&format!(
            "<path d=\"{d}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n"
        ));
    }
    legend(&mut out, &transformed);
    out.push_str("</svg>\n");
    out
}

pub fn write_svg(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|e| CliError::io(path, e))
}
