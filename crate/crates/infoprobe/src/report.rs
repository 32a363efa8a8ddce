//! CSV, SVG and console renderings of sweep and audit results.
//!
//! All output is a pure function of its input rows: numbers use Rust's
//! shortest round-trip formatting (always `.` as decimal separator) and
//! the SVG is emitted by hand with fixed geometry.

use std::fmt::Write as _;

use infoprobe_core::oracle::DpiAudit;
use infoprobe_core::trainer::{LayerSweepReport, SweepRow};

pub const SWEEP_CSV_HEADER: &str = "layer,probe,estimator,mi_nats,mi_over_hy,accuracy,best_epoch";

/// Tag written into every SVG; bump when the drawing code changes.
pub const SVG_GENERATOR: &str = "infoprobe-svg 1";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn sweep_csv(report: &LayerSweepReport) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.layer,
            r.probe.as_str(),
            r.estimator.as_str(),
            r.test.value,
            opt(r.mi_over_hy()),
            r.test.accuracy,
            r.best_epoch
        );
    }
    out
}

/// Exact `I(Y; H^i)` per stage.
pub fn exact_mi_csv(audit: &DpiAudit) -> String {
    let mut out = String::from("layer,exact_mi_nats,h_y\n");
    for (i, v) in audit.mi.iter().enumerate() {
        let _ = writeln!(out, "{i},{v},{}", audit.label_entropy);
    }
    out
}

/// Quantity plotted on one chart.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    MiNats,
    MiOverHy,
    Accuracy,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::MiNats, Metric::MiOverHy, Metric::Accuracy];

    pub fn file_stem(self) -> &'static str {
        match self {
            Metric::MiNats => "mi_nats",
            Metric::MiOverHy => "mi_over_hy",
            Metric::Accuracy => "accuracy",
        }
    }

    fn label(self) -> &'static str {
        match self {
            Metric::MiNats => "MI estimate (nats)",
            Metric::MiOverHy => "MI / H(Y)",
            Metric::Accuracy => "accuracy",
        }
    }

    fn value(self, r: &SweepRow) -> Option<f64> {
        match self {
            Metric::MiNats => Some(r.test.value),
            Metric::MiOverHy => r.mi_over_hy(),
            Metric::Accuracy => Some(r.test.accuracy),
        }
    }

    /// `H(Y)` for raw MI, 1 for the normalised MI and for accuracy.
    pub fn ceiling(self, h_y: f64) -> f64 {
        match self {
            Metric::MiNats => h_y,
            Metric::MiOverHy | Metric::Accuracy => 1.0,
        }
    }
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn fmt_coord(v: f64) -> String {
    format!("{v:.2}")
}

/// Line chart with one series per (probe, estimator) over layers and a
/// dashed ceiling line.
pub fn sweep_svg(report: &LayerSweepReport, metric: Metric) -> String {
    let mut series: Vec<(String, Vec<(usize, f64)>)> = Vec::new();
    for r in &report.rows {
        let name = format!("{} / {}", r.probe.as_str(), r.estimator.as_str());
        let Some(v) = metric.value(r) else { continue };
        match series.iter_mut().find(|(n, _)| *n == name) {
            Some((_, pts)) => pts.push((r.layer, v)),
            None => series.push((name, vec![(r.layer, v)])),
        }
    }
    let ceiling = metric.ceiling(report.h_y);
    let layers: Vec<usize> = report.rows.iter().map(|r| r.layer).collect();
    let x_min = layers.iter().copied().min().unwrap_or(0) as f64;
    let x_max = (layers.iter().copied().max().unwrap_or(1) as f64).max(x_min + 1.0);
    let values = series.iter().flat_map(|(_, p)| p.iter().map(|&(_, v)| v));
    let lo = values.clone().fold(0.0f64, f64::min);
    let hi = values.fold(ceiling, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let (y_min, y_max) = (lo - 0.05 * span, hi + 0.05 * span);

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = |y: f64| TOP + (y_max - y) / (y_max - y_min) * plot_h;

    let mut s = String::new();
    let _ = writeln!(s, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>");
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(s, "<!-- {SVG_GENERATOR} -->");
    let _ = writeln!(s, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    // axes
    let (x0, x1, y0, y1) = (sx(x_min), sx(x_max), sy(y_min), sy(y_max));
    let _ = writeln!(
        s,
        "<path class=\"axis\" d=\"M{} {} L{} {} L{} {}\" fill=\"none\" stroke=\"black\"/>",
        fmt_coord(x0),
        fmt_coord(y1),
        fmt_coord(x0),
        fmt_coord(y0),
        fmt_coord(x1),
        fmt_coord(y0)
    );
    let mut ticks: Vec<usize> = layers.clone();
    ticks.sort_unstable();
    ticks.dedup();
    for l in ticks {
        let x = sx(l as f64);
        let _ = writeln!(
            s,
            "<line class=\"tick\" x1=\"{x}\" y1=\"{y}\" x2=\"{x}\" y2=\"{y2}\" stroke=\"black\"/><text x=\"{x}\" y=\"{ty}\" text-anchor=\"middle\">{l}</text>",
            x = fmt_coord(x),
            y = fmt_coord(y0),
            y2 = fmt_coord(y0 + 5.0),
            ty = fmt_coord(y0 + 18.0)
        );
    }
    for k in 0..=4 {
        let v = y_min + (y_max - y_min) * k as f64 / 4.0;
        let y = sy(v);
        let _ = writeln!(
            s,
            "<line class=\"tick\" x1=\"{x}\" y1=\"{y}\" x2=\"{x2}\" y2=\"{y}\" stroke=\"black\"/><text x=\"{tx}\" y=\"{ty}\" text-anchor=\"end\">{v:.3}</text>",
            x = fmt_coord(x0 - 5.0),
            x2 = fmt_coord(x0),
            y = fmt_coord(y),
            tx = fmt_coord(x0 - 8.0),
            ty = fmt_coord(y + 4.0)
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">layer</text>",
        fmt_coord((x0 + x1) / 2.0),
        fmt_coord(HEIGHT - 10.0)
    );
    let _ = writeln!(
        s,
        "<text x=\"15\" y=\"{y}\" text-anchor=\"middle\" transform=\"rotate(-90 15 {y})\">{}</text>",
        metric.label(),
        y = fmt_coord((y0 + y1) / 2.0)
    );
    let cy = sy(ceiling);
    let _ = writeln!(
        s,
        "<line class=\"ceiling\" data-value=\"{ceiling}\" x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"gray\" stroke-dasharray=\"6 4\"/>",
        fmt_coord(x0),
        fmt_coord(x1),
        y = fmt_coord(cy)
    );
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut d = String::new();
        for (j, &(l, v)) in pts.iter().enumerate() {
            let _ = write!(
                d,
                "{}{} {} ",
                if j == 0 { "M" } else { "L" },
                fmt_coord(sx(l as f64)),
                fmt_coord(sy(v))
            );
        }
        let _ = writeln!(
            s,
            "<path class=\"series\" d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>",
            d.trim_end()
        );
        for &(l, v) in pts {
            let _ = writeln!(
                s,
                "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{color}\"/>",
                fmt_coord(sx(l as f64)),
                fmt_coord(sy(v))
            );
        }
        let ly = TOP + 16.0 * k as f64;
        let _ = writeln!(
            s,
            "<line x1=\"{a}\" y1=\"{y}\" x2=\"{b}\" y2=\"{y}\" stroke=\"{color}\" stroke-width=\"2\"/><text x=\"{t}\" y=\"{ty}\">{name}</text>",
            a = fmt_coord(WIDTH - RIGHT + 10.0),
            b = fmt_coord(WIDTH - RIGHT + 30.0),
            y = fmt_coord(ly),
            t = fmt_coord(WIDTH - RIGHT + 35.0),
            ty = fmt_coord(ly + 4.0)
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" fill=\"gray\">ceiling {ceiling:.4}</text>",
        fmt_coord(WIDTH - RIGHT + 10.0),
        fmt_coord(TOP + 16.0 * series.len() as f64 + 10.0)
    );
    s.push_str("</svg>\n");
    s
}

/// Fixed-width table with a header row; columns are right-aligned except
/// the first.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |cells: &mut dyn Iterator<Item = &str>, out: &mut String| {
        for (k, (c, w)) in cells.zip(&widths).enumerate() {
            if k == 0 {
                let _ = write!(out, "{c:<w$}");
            } else {
                let _ = write!(out, "  {c:>w$}");
            }
        }
        out.push('\n');
    };
    line(&mut header.iter().copied(), &mut out);
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    line(&mut rule.iter().map(String::as_str), &mut out);
    for r in rows {
        line(&mut r.iter().map(String::as_str), &mut out);
    }
    out
}

pub fn sweep_table(report: &LayerSweepReport) -> String {
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.layer.to_string(),
                r.probe.as_str().to_string(),
                r.estimator.as_str().to_string(),
                format!("{:.4}", r.test.value),
                r.mi_over_hy().map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into()),
                format!("{:.3}", r.test.accuracy),
                format!("{:.2}", r.best_epoch),
                r.wall_time_secs
                    .map(|t| format!("{t:.2}s"))
                    .unwrap_or_else(|| "-".into()),
            ]
        })
        .collect();
    table(
        &[
            "layer",
            "probe",
            "estimator",
            "mi_nats",
            "mi/H(Y)",
            "accuracy",
            "best_epoch",
            "time",
        ],
        &rows,
    )
}
