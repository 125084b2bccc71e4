//! Minimal SVG line and bar charts.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 360.0;
const MARGIN: f64 = 48.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = write!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = write!(out, r#"<text x="{}" y="18" text-anchor="middle" font-size="13">{}</text>"#, W / 2.0, escape(title));
    let (x0, y0, x1, y1) = (MARGIN, H - MARGIN, W - MARGIN, MARGIN);
    let _ = write!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = write!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
}

/// One `<polyline>` per series, with a legend entry each.
pub fn line_chart(title: &str, x_label: &str, series: &[Series]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let (xlo, xhi) = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (ylo, yhi) = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let sx = |x: f64| MARGIN + (x - xlo) / (xhi - xlo) * (W - 2.0 * MARGIN);
    let sy = |y: f64| H - MARGIN - (y - ylo) / (yhi - ylo) * (H - 2.0 * MARGIN);
    for (v, anchor, x, y) in [(ylo, "end", MARGIN - 4.0, H - MARGIN), (yhi, "end", MARGIN - 4.0, MARGIN + 4.0)] {
        let _ = write!(out, r#"<text x="{x}" y="{y}" text-anchor="{anchor}">{v:.4}</text>"#);
    }
    let _ = write!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 12.0,
        escape(x_label)
    );
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = write!(
            out,
            r#"<polyline class="series" data-name="{}" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            escape(s.name),
            pts.join(" ")
        );
        let ly = MARGIN + 14.0 * i as f64;
        let _ = write!(
            out,
            r#"<text x="{}" y="{ly}" fill="{color}">{}</text>"#,
            W - MARGIN - 120.0,
            escape(s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// One `<rect>` per bar; missing values are drawn as labeled gaps.
pub fn bar_chart(title: &str, bars: &[(&str, Option<f64>)]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let (lo, hi) = bounds(bars.iter().filter_map(|b| b.1).chain([0.0]));
    let sy = |y: f64| H - MARGIN - (y - lo) / (hi - lo) * (H - 2.0 * MARGIN);
    let slot = (W - 2.0 * MARGIN) / bars.len().max(1) as f64;
    for (i, (name, value)) in bars.iter().enumerate() {
        let x = MARGIN + slot * i as f64 + slot * 0.15;
        let cx = x + slot * 0.35;
        match value {
            Some(v) if v.is_finite() => {
                let (top, bottom) = (sy(v.max(0.0)), sy(v.min(0.0)));
                let _ = write!(
                    out,
                    r#"<rect class="bar" data-name="{}" x="{x:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                    escape(name),
                    slot * 0.7,
                    (bottom - top).max(0.5),
                    COLORS[i % COLORS.len()]
                );
                let _ = write!(out, r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{v:.4}</text>"#, top - 4.0);
            }
            _ => {
                let _ = write!(out, r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">n/a</text>"#, sy(0.0) - 4.0);
            }
        }
        let _ = write!(
            out,
            r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            H - MARGIN + 14.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}
