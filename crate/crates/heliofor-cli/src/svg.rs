//! Dependency-free SVG plots.
//!
//! Fixed 960x480 canvas, coordinates rounded to 0.01 px, nothing derived
//! from the clock or the environment: identical inputs give byte-identical
//! files. Non-finite points break a line into segments instead of
//! poisoning the path.

use std::fmt::Write as _;

const W: f64 = 960.0;
const H: f64 = 480.0;
const MARGIN_L: f64 = 76.0;
const MARGIN_R: f64 = 18.0;
const MARGIN_T: f64 = 44.0;
const MARGIN_B: f64 = 48.0;

/// One fixed color per plotted quantity, stable across every chart.
pub mod palette {
    pub const ACTUAL: &str = "#d62728";
    pub const NARX_LSTM: &str = "#1f77b4";
    pub const LSTM: &str = "#17becf";
    pub const KNN: &str = "#7f7f7f";
    pub const EXTRA_TREES: &str = "#9467bd";
    pub const BAR: &str = "#1f77b4";
}

pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub values: &'a [f64],
}

fn fmt_value(v: f64) -> String {
    if v.abs() >= 10_000.0 {
        format!("{v:.0}")
    } else if v.abs() >= 10.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.3}")
    }
}

fn open_document(title: &str) -> String {
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="monospace" font-size="12">"#
    )
    .expect("string write");
    writeln!(out, r##"<rect width="{W}" height="{H}" fill="#ffffff"/>"##).expect("string write");
    writeln!(
        out,
        r##"<text x="{:.2}" y="22" text-anchor="middle" font-size="15" fill="#202020">{}</text>"##,
        W / 2.0,
        escape(title)
    )
    .expect("string write");
    out
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Frame, horizontal gridlines, and y tick labels for a fixed value range.
fn grid(out: &mut String, y_label: &str, lo: f64, hi: f64) {
    let plot_h = H - MARGIN_T - MARGIN_B;
    writeln!(
        out,
        r##"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{:.2}" height="{:.2}" fill="none" stroke="#b0b0b0"/>"##,
        W - MARGIN_L - MARGIN_R,
        plot_h
    )
    .expect("string write");
    for t in 0..5 {
        let frac = t as f64 / 4.0;
        let y = MARGIN_T + plot_h * (1.0 - frac);
        let value = lo + (hi - lo) * frac;
        if t > 0 && t < 4 {
            writeln!(
                out,
                r##"<line x1="{MARGIN_L}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/>"##,
                W - MARGIN_R
            )
            .expect("string write");
        }
        writeln!(
            out,
            r##"<text x="{:.2}" y="{:.2}" text-anchor="end" fill="#505050">{}</text>"##,
            MARGIN_L - 6.0,
            y + 4.0,
            fmt_value(value)
        )
        .expect("string write");
    }
    writeln!(
        out,
        r##"<text x="{MARGIN_L}" y="{:.2}" fill="#505050">{}</text>"##,
        MARGIN_T - 8.0,
        escape(y_label)
    )
    .expect("string write");
}

/// Value range covering every finite point, padded so lines stay off the
/// frame. Degenerate and empty inputs fall back to a unit band.
fn value_range<'a>(values: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if lo > hi {
        return (0.0, 1.0);
    }
    let pad = if hi > lo { (hi - lo) * 0.05 } else { hi.abs().max(1.0) * 0.05 };
    (lo - pad, hi + pad)
}

pub fn line_plot(title: &str, y_label: &str, series: &[Series]) -> String {
    let mut out = open_document(title);
    let (lo, hi) = value_range(series.iter().flat_map(|s| s.values.iter()));
    grid(&mut out, y_label, lo, hi);

    let plot_w = W - MARGIN_L - MARGIN_R;
    let plot_h = H - MARGIN_T - MARGIN_B;
    let n = series.iter().map(|s| s.values.len()).max().unwrap_or(0);
    let x_at = |i: usize| {
        if n < 2 {
            MARGIN_L + plot_w / 2.0
        } else {
            MARGIN_L + plot_w * i as f64 / (n - 1) as f64
        }
    };
    let y_at = |v: f64| MARGIN_T + plot_h * (1.0 - (v - lo) / (hi - lo));

    for s in series {
        let mut segment: Vec<(f64, f64)> = Vec::new();
        let flush = |seg: &mut Vec<(f64, f64)>, out: &mut String| {
            match seg.len() {
                0 => {}
                1 => writeln!(
                    out,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{}"/>"#,
                    seg[0].0, seg[0].1, s.color
                )
                .expect("string write"),
                _ => {
                    let points: Vec<String> =
                        seg.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                    writeln!(
                        out,
                        r#"<polyline fill="none" stroke="{}" stroke-width="1.3" points="{}"/>"#,
                        s.color,
                        points.join(" ")
                    )
                    .expect("string write");
                }
            }
            seg.clear();
        };
        for (i, &v) in s.values.iter().enumerate() {
            if v.is_finite() {
                segment.push((x_at(i), y_at(v)));
            } else {
                flush(&mut segment, &mut out);
            }
        }
        flush(&mut segment, &mut out);
    }

    // x tick labels: first and last step index.
    if n > 0 {
        writeln!(
            out,
            r##"<text x="{MARGIN_L}" y="{:.2}" fill="#505050">0</text>"##,
            H - MARGIN_B + 16.0
        )
        .expect("string write");
        if n > 1 {
            writeln!(
                out,
                r##"<text x="{:.2}" y="{:.2}" text-anchor="end" fill="#505050">{}</text>"##,
                W - MARGIN_R,
                H - MARGIN_B + 16.0,
                n - 1
            )
            .expect("string write");
        }
    }
    writeln!(
        out,
        r##"<text x="{:.2}" y="{:.2}" text-anchor="middle" fill="#505050">step</text>"##,
        MARGIN_L + plot_w / 2.0,
        H - 12.0
    )
    .expect("string write");

    for (i, s) in series.iter().enumerate() {
        let y = MARGIN_T + 16.0 + i as f64 * 16.0;
        let x = W - MARGIN_R - 150.0;
        writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-width="2"/>"#,
            y - 4.0,
            x + 18.0,
            y - 4.0,
            s.color
        )
        .expect("string write");
        writeln!(
            out,
            r##"<text x="{:.2}" y="{y:.2}" fill="#202020">{}</text>"##,
            x + 24.0,
            escape(s.label)
        )
        .expect("string write");
    }

    out.push_str("</svg>\n");
    out
}

/// Vertical bars for nonnegative scores, e.g. importance shares.
pub fn bar_chart(title: &str, y_label: &str, bars: &[(&str, f64)]) -> String {
    let mut out = open_document(title);
    let hi = bars.iter().map(|(_, v)| *v).fold(0.0_f64, f64::max);
    let hi = if hi > 0.0 { hi * 1.1 } else { 1.0 };
    grid(&mut out, y_label, 0.0, hi);

    let plot_w = W - MARGIN_L - MARGIN_R;
    let plot_h = H - MARGIN_T - MARGIN_B;
    let n = bars.len().max(1);
    let slot = plot_w / n as f64;
    let bar_w = slot * 0.55;
    for (i, (label, value)) in bars.iter().enumerate() {
        let v = value.max(0.0);
        let height = plot_h * v / hi;
        let x = MARGIN_L + slot * i as f64 + (slot - bar_w) / 2.0;
        let y = MARGIN_T + plot_h - height;
        writeln!(
            out,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{bar_w:.2}" height="{height:.2}" fill="{}"/>"#,
            palette::BAR
        )
        .expect("string write");
        let center = x + bar_w / 2.0;
        writeln!(
            out,
            r##"<text x="{center:.2}" y="{:.2}" text-anchor="middle" fill="#505050">{}</text>"##,
            y - 6.0,
            fmt_value(*value)
        )
        .expect("string write");
        writeln!(
            out,
            r##"<text x="{center:.2}" y="{:.2}" text-anchor="middle" fill="#202020">{}</text>"##,
            H - MARGIN_B + 18.0,
            escape(label)
        )
        .expect("string write");
    }
    out.push_str("</svg>\n");
    out
}
