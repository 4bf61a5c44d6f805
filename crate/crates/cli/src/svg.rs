//! Plain static SVG renderings of the plot data. Coordinates are printed
//! with fixed precision so output bytes depend only on the input.

use std::fmt::Write;

use crate::plotdata::Histogram;

const WIDTH: f64 = 480.0;
const PANEL_HEIGHT: f64 = 120.0;
const MARGIN: f64 = 40.0;

fn header(out: &mut String, height: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{height:.0}" viewBox="0 0 {WIDTH:.0} {height:.0}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    }
}

/// One histogram panel per group, stacked vertically on shared bins.
pub fn histograms(h: &Histogram, metric: &str) -> String {
    let height = MARGIN * 2.0 + PANEL_HEIGHT * h.groups.len() as f64;
    let mut out = String::new();
    header(&mut out, height);
    let n_bins = h.edges.len() - 1;
    let bar = (WIDTH - 2.0 * MARGIN) / n_bins as f64;
    for (g, (level, counts)) in h.groups.iter().enumerate() {
        let top = MARGIN + PANEL_HEIGHT * g as f64;
        let base = top + PANEL_HEIGHT - 20.0;
        let max = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="11">{}</text>"#,
            MARGIN,
            top + 10.0,
            escape(level)
        );
        for (i, c) in counts.iter().enumerate() {
            let hgt = (PANEL_HEIGHT - 35.0) * *c as f64 / max;
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="steelblue"/>"#,
                MARGIN + bar * i as f64,
                base - hgt,
                bar * 0.9,
                hgt
            );
        }
        let _ = writeln!(
            out,
            r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#,
            MARGIN,
            base,
            WIDTH - MARGIN,
            base
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="11">{} [{:.4}, {:.4}]</text>"#,
        MARGIN,
        height - 10.0,
        escape(metric),
        h.edges[0],
        h.edges[n_bins]
    );
    out.push_str("</svg>\n");
    out
}

pub fn scatter(points: &[(f64, f64)], x_label: &str, y_label: &str) -> String {
    let height = WIDTH;
    let mut out = String::new();
    header(&mut out, height);
    let (x0, x1) = range(points.iter().map(|p| p.0));
    let (y0, y1) = range(points.iter().map(|p| p.1));
    let span = WIDTH - 2.0 * MARGIN;
    for (x, y) in points {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="steelblue"/>"#,
            MARGIN + span * (x - x0) / (x1 - x0),
            height - MARGIN - span * (y - y0) / (y1 - y0)
        );
    }
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN:.1}" y="{MARGIN:.1}" width="{span:.1}" height="{span:.1}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="11">{} [{:.4}, {:.4}]</text>"#,
        MARGIN,
        height - 10.0,
        escape(x_label),
        x0,
        x1
    );
    let _ = writeln!(
        out,
        r#"<text x="4" y="{:.1}" font-size="11">{} [{:.4}, {:.4}]</text>"#,
        MARGIN - 10.0,
        escape(y_label),
        y0,
        y1
    );
    out.push_str("</svg>\n");
    out
}
