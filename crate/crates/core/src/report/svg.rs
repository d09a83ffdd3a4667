use std::fmt::Write;

use super::ScatterSummary;
use crate::assembly::TupleRecord;

const SIZE: f64 = 480.0;
const PAD: f64 = 48.0;

/// Square scatter of Δ_observed against Δ_expected with the fitted line
/// (solid) and the identity line (dashed).
pub fn scatter_svg(records: &[TupleRecord], summary: &ScatterSummary) -> String {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .map(|r| (r.delta_expected, r.delta_observed))
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    let (mut lo, mut hi) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(x, y)| {
            (lo.min(x).min(y), hi.max(x).max(y))
        });
    if !lo.is_finite() || hi - lo < 1e-12 {
        lo -= 1.0;
        hi += 1.0;
        if !lo.is_finite() {
            (lo, hi) = (-1.0, 1.0);
        }
    }
    let span = hi - lo;
    let sx = |v: f64| PAD + (v - lo) / span * (SIZE - 2.0 * PAD);
    let sy = |v: f64| SIZE - PAD - (v - lo) / span * (SIZE - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{w}" height="{w}" fill="none" stroke="black"/>"#,
        w = SIZE - 2.0 * PAD
    );
    for (x, y) in &pts {
        let _ = writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="2" fill="#1f77b4" fill-opacity="0.5"/>"##,
            sx(*x),
            sy(*y)
        );
    }
    let _ = writeln!(
        s,
        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="gray" stroke-dasharray="6,4"/>"#,
        sx(lo),
        sy(lo),
        sx(hi),
        sy(hi)
    );
    if let (Some(m), Some(b)) = (summary.slope, summary.intercept) {
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="crimson" stroke-width="2"/>"#,
            sx(lo),
            sy(m * lo + b),
            sx(hi),
            sy(m * hi + b)
        );
    }
    let caption = match (summary.r, summary.slope) {
        (Some(r), Some(m)) => format!(
            "{}: r = {r:.3}, slope = {m:.3}, n = {}",
            summary.label, summary.n
        ),
        _ => format!("{}: n = {}", summary.label, summary.n),
    };
    let _ = writeln!(
        s,
        r#"<text x="{PAD}" y="{:.0}" font-family="sans-serif" font-size="13">{}</text>"#,
        PAD - 14.0,
        escape(&caption)
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.0}" y="{:.0}" font-family="sans-serif" font-size="12" text-anchor="middle">expected update</text>"#,
        SIZE / 2.0,
        SIZE - 14.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.0}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 14 {:.0})">observed update</text>"#,
        SIZE / 2.0,
        SIZE / 2.0
    );
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
