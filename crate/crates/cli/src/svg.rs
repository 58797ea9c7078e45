//! Standalone SVG line charts of a run log.

use std::fmt::Write as _;

use r2unet::train::RunLog;

const W: f64 = 640.0;
const PANEL_H: f64 = 240.0;
const MARGIN: f64 = 48.0;
const COLORS: [&str; 2] = ["#1f77b4", "#d62728"];

type Series<'a> = (&'a str, Vec<(f64, f64)>);

fn panel(out: &mut String, top: f64, title: &str, series: &[Series]) {
    let points: Vec<_> = series.iter().flat_map(|(_, p)| p.iter().copied()).collect();
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="14" text-anchor="middle">{title}</text>"#,
        W / 2.0,
        top + 18.0
    );
    if points.is_empty() {
        return;
    }
    let (x0, x1) = points.iter().fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (mut y0, mut y1) = points.iter().fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.1), b.max(p.1)));
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let x_span = (x1 - x0).max(1.0);
    let (left, right) = (MARGIN, W - MARGIN / 2.0);
    let (bottom, upper) = (top + PANEL_H - MARGIN / 2.0, top + MARGIN / 1.5);
    let sx = |x: f64| left + (x - x0) / x_span * (right - left);
    let sy = |y: f64| bottom - (y - y0) / (y1 - y0) * (bottom - upper);
    let _ = writeln!(
        out,
        r##"<rect x="{left}" y="{upper}" width="{}" height="{}" fill="none" stroke="#888"/>"##,
        right - left,
        bottom - upper
    );
    for (v, y) in [(y0, bottom), (y1, upper)] {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="10" text-anchor="end">{v:.4}</text>"#,
            left - 4.0,
            y + 3.0
        );
    }
    for (v, x) in [(x0, left), (x1, right)] {
        let _ = writeln!(
            out,
            r#"<text x="{x}" y="{}" font-size="10" text-anchor="middle">{v}</text>"#,
            bottom + 14.0
        );
    }
    for (i, (name, pts)) in series.iter().enumerate() {
        if pts.is_empty() {
            continue;
        }
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}">{name}</text>"#,
            right - 90.0,
            upper + 14.0 + 14.0 * i as f64
        );
    }
}

/// Loss and accuracy against epoch; absent monitors leave their series out.
pub fn curves(log: &RunLog) -> String {
    let pick = |f: &dyn Fn(&r2unet::train::EpochRecord) -> Option<f64>| -> Vec<(f64, f64)> {
        log.records.iter().filter_map(|r| f(r).map(|v| (r.epoch as f64, v))).collect()
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{}" font-family="sans-serif">"#,
        2.0 * PANEL_H
    );
    panel(
        &mut out,
        0.0,
        "loss",
        &[("train", pick(&|r| Some(r.train_loss))), ("validation", pick(&|r| r.val_loss))],
    );
    panel(
        &mut out,
        PANEL_H,
        "accuracy",
        &[("train", pick(&|r| r.train_acc)), ("validation", pick(&|r| r.val_acc))],
    );
    out.push_str("</svg>\n");
    out
}
