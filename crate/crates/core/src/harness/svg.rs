//! Standalone SVG line charts: actual vs predicted, and signed error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::series::{read_error_series, ErrorRow};
use super::BenchmarkReport;
use crate::error::{Error, Result};

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 48.0;

struct Line<'a> {
    label: &'a str,
    colour: &'a str,
    points: Vec<(usize, f64)>,
}

fn polyline(points: &[(usize, f64)], n: usize, lo: f64, hi: f64) -> String {
    let span = if hi > lo { hi - lo } else { 1.0 };
    let x_step = (WIDTH - 2.0 * MARGIN) / (n.max(2) - 1) as f64;
    let mut out = String::new();
    for (i, v) in points {
        let x = MARGIN + *i as f64 * x_step;
        let y = HEIGHT - MARGIN - (v - lo) / span * (HEIGHT - 2.0 * MARGIN);
        let _ = write!(out, "{x:.1},{y:.1} ");
    }
    out.pop();
    out
}

fn chart(title: &str, n: usize, lines: &[Line], zero_line: bool) -> String {
    let values = lines.iter().flat_map(|l| l.points.iter().map(|p| p.1));
    let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if zero_line {
        lo = lo.min(0.0);
        hi = hi.max(0.0);
    }
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="24" font-family="sans-serif" font-size="14">{title}</text>"#);
    let _ = writeln!(
        s,
        r##"<g stroke="#999" stroke-width="1"><line x1="{m}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{m}" y1="{m}" x2="{m}" y2="{b}"/></g>"##,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    let _ = writeln!(
        s,
        r#"<text x="4" y="{:.1}" font-family="sans-serif" font-size="10">{hi:.2}</text><text x="4" y="{:.1}" font-family="sans-serif" font-size="10">{lo:.2}</text>"#,
        MARGIN + 4.0,
        HEIGHT - MARGIN
    );
    if zero_line && hi > lo {
        let y = HEIGHT - MARGIN - (0.0 - lo) / (hi - lo) * (HEIGHT - 2.0 * MARGIN);
        let _ = writeln!(
            s,
            r##"<line x1="{MARGIN}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#bbb" stroke-dasharray="4 3"/>"##,
            WIDTH - MARGIN
        );
    }
    for (k, line) in lines.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="1" points="{}"/>"#,
            line.colour,
            polyline(&line.points, n, lo, hi)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="24" font-family="sans-serif" font-size="12" fill="{}">{}</text>"#,
            WIDTH - MARGIN - 160.0 + 80.0 * k as f64,
            line.colour,
            line.label
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Actual-vs-predicted and signed-error charts for one cell.
pub fn render_cell_charts(title: &str, rows: &[ErrorRow]) -> (String, String) {
    let n = rows.len();
    let actual = rows.iter().enumerate().map(|(i, r)| (i, r.actual)).collect();
    let predicted = rows.iter().enumerate().filter_map(|(i, r)| r.predicted.map(|p| (i, p))).collect();
    let error = rows.iter().enumerate().filter_map(|(i, r)| r.error.map(|e| (i, e))).collect();
    let fit = chart(
        &format!("{title}: actual vs predicted"),
        n,
        &[
            Line { label: "actual", colour: "#1f77b4", points: actual },
            Line { label: "predicted", colour: "#d62728", points: predicted },
        ],
        false,
    );
    let err = chart(
        &format!("{title}: signed error (predicted − actual)"),
        n,
        &[Line { label: "error", colour: "#2ca02c", points: error }],
        true,
    );
    (fit, err)
}

/// Two charts per successful cell, read from the run directory's error
/// tables and written to `out`. Returns the written paths.
pub fn write_charts(report: &BenchmarkReport, run_dir: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut written = Vec::new();
    for c in &report.cells {
        let Some(file) = &c.errors_file else { continue };
        let rows = read_error_series(&run_dir.join(file))?;
        let (fit, err) = render_cell_charts(&format!("{} / {}", c.model, c.target), &rows);
        for (kind, body) in [("fit", fit), ("error", err)] {
            let path = out.join(format!("{kind}_{}_{}.svg", c.model, c.target));
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    #[test]
    fn charts_are_well_formed() {
        let t = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap().fixed_offset();
        let rows: Vec<ErrorRow> = (0..5)
            .map(|i| ErrorRow {
                timestamp: t,
                actual: i as f64,
                predicted: (i > 0).then_some(i as f64 + 0.5),
                error: (i > 0).then_some(0.5),
                relative_error: None,
                excluded: i == 0,
            })
            .collect();
        let (fit, err) = render_cell_charts("gbrt / price", &rows);
        for svg in [&fit, &err] {
            assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        }
        assert_eq!(fit.matches("<polyline").count(), 2);
        assert_eq!(err.matches("<polyline").count(), 1);
    }
}
