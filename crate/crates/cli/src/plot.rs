//! Static SVG line charts of experiment results.

use std::fmt::Write;

use crate::experiment::Experiment;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn tick_label(v: f64, log_y: bool) -> String {
    if log_y {
        format!("1e{}", v.round())
    } else if v.abs() >= 100.0 || v == v.round() {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

fn chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    band: Option<&[(f64, f64, f64)]>,
    log_y: bool,
    provenance: &str,
) -> String {
    let ty = |v: f64| if log_y { v.log10() } else { v };
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let (x0, x1) = bounds(xs);
    let mut ys: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| ty(p.1))).collect();
    if let Some(b) = band {
        ys.extend(b.iter().flat_map(|&(_, lo, hi)| [ty(lo), ty(hi)]));
    }
    let (y0, y1) = bounds(ys.into_iter());
    let (y0, y1) = if log_y { (y0.floor(), y1.ceil()) } else { (y0.min(0.0), y1) };
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, "<title>{}</title>", escape(title));
    let _ = writeln!(out, "<desc>{}</desc>", escape(provenance));
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    for i in 0..=5 {
        let fx = x0 + (x1 - x0) * i as f64 / 5.0;
        let fy = y0 + (y1 - y0) * i as f64 / 5.0;
        let _ = writeln!(
            out,
            r##"<line x1="{0:.1}" y1="{1:.1}" x2="{0:.1}" y2="{2:.1}" stroke="#ddd"/><text x="{0:.1}" y="{3:.1}" text-anchor="middle">{4}</text>"##,
            sx(fx),
            TOP,
            TOP + ph,
            TOP + ph + 16.0,
            tick_label(fx, false)
        );
        let _ = writeln!(
            out,
            r##"<line x1="{0:.1}" y1="{1:.1}" x2="{2:.1}" y2="{1:.1}" stroke="#ddd"/><text x="{3:.1}" y="{4:.1}" text-anchor="end">{5}</text>"##,
            LEFT,
            sy(fy),
            LEFT + pw,
            LEFT - 6.0,
            sy(fy) + 4.0,
            tick_label(fy, log_y)
        );
    }
    let _ = writeln!(
        out,
        r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text transform="translate(16 {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
        TOP + ph / 2.0,
        escape(y_label)
    );
    if let Some(b) = band.filter(|b| !b.is_empty()) {
        let upper = b.iter().map(|&(x, _, hi)| format!("{:.2},{:.2}", sx(x), sy(ty(hi))));
        let lower = b.iter().rev().map(|&(x, lo, _)| format!("{:.2},{:.2}", sx(x), sy(ty(lo))));
        let pts: Vec<String> = upper.chain(lower).collect();
        let _ = writeln!(
            out,
            r##"<polygon points="{}" fill="#1f77b4" fill-opacity="0.2" stroke="none"/>"##,
            pts.join(" ")
        );
    }
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && ty(p.1).is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(ty(y))))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
        let ly = TOP + 14.0 + 14.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{ly:.1}" text-anchor="end" fill="{color}">{}</text>"#,
            LEFT + pw - 8.0,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Median test error against gradient evaluations / |Q|, with the
/// [0.25, 0.75] quantile band.
pub fn error_plot(exp: &Experiment, provenance: &str) -> String {
    let median: Vec<(f64, f64)> = exp.summary.iter().map(|s| (s.evals_per_q, s.test_error.0)).collect();
    let band: Vec<(f64, f64, f64)> = exp
        .summary
        .iter()
        .map(|s| (s.evals_per_q, s.test_error.1, s.test_error.2))
        .collect();
    let name = format!("{} / {}", exp.config.loss.kind, exp.config.optimizer.name());
    chart(
        &format!("{name}: test error"),
        "gradient evaluations / |Q|",
        "test error",
        &[Series {
            label: format!("median of {} seeds", exp.runs.len()),
            points: median,
        }],
        Some(&band),
        false,
        provenance,
    )
}

/// Per-epoch step size of every seed on a log scale.
pub fn step_plot(exp: &Experiment, provenance: &str) -> String {
    let series: Vec<Series> = exp
        .runs
        .iter()
        .take(COLORS.len())
        .map(|r| Series {
            label: format!("seed {}", r.seed),
            points: r.epochs.iter().map(|e| (e.epoch as f64, e.step_size)).collect(),
        })
        .collect();
    let name = format!("{} / {}", exp.config.loss.kind, exp.config.optimizer.name());
    chart(
        &format!("{name}: step size"),
        "epoch",
        "step size",
        &series,
        None,
        true,
        provenance,
    )
}
