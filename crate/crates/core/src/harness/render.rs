//! Report files and text renderings.
//!
//! Everything here is a pure function of the report, so re-rendering a
//! stored report reproduces the original files byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::series::render_error_series;
use super::{BenchmarkReport, ACCURACY_THRESHOLDS};
use crate::dataset::Target;
use crate::error::{Error, Result};
use crate::models::ModelKind;

pub const REPORT_FILE: &str = "report.json";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TIMINGS_FILE: &str = "timings.csv";

pub fn accuracy_file_name(target: Target) -> String {
    format!("accuracy_{}.csv", target.name())
}

fn threshold_label(t: f64) -> String {
    format!("±{}%", (t * 100.0).round())
}

fn num(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// One row per threshold, one column per model.
pub fn accuracy_csv(report: &BenchmarkReport, target: Target) -> String {
    let models = report.models();
    let mut out = String::from("threshold");
    for m in &models {
        out.push(',');
        out.push_str(m.name());
    }
    out.push('\n');
    for t in ACCURACY_THRESHOLDS {
        out.push_str(&threshold_label(t));
        for m in &models {
            out.push(',');
            out.push_str(&num(report.cell(*m, target).and_then(|c| c.accuracy(t))));
        }
        out.push('\n');
    }
    out
}

pub fn summary_csv(report: &BenchmarkReport) -> String {
    let mut out = String::from("model,target,mse,mae,r2,mape,n_excluded\n");
    for c in &report.cells {
        let m = c.metrics.as_ref();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            c.model,
            c.target,
            num(m.map(|m| m.mse)),
            num(m.map(|m| m.mae)),
            num(m.map(|m| m.r2)),
            num(m.map(|m| m.mape)),
            m.map(|m| m.n_excluded.to_string()).unwrap_or_default()
        );
    }
    out
}

pub fn timings_csv(report: &BenchmarkReport) -> String {
    let mut out = String::from("model,target,fit_seconds\n");
    for c in &report.cells {
        let _ = writeln!(out, "{},{},{:.3}", c.model, c.target, c.fit_seconds);
    }
    out
}

#[derive(Serialize)]
struct SummaryRow {
    model: ModelKind,
    target: Target,
    mse: Option<f64>,
    mae: Option<f64>,
    r2: Option<f64>,
    mape: Option<f64>,
    n_excluded: Option<usize>,
    accuracy_5: Option<f64>,
    accuracy_10: Option<f64>,
    failure: Option<String>,
}

pub fn summary_json(report: &BenchmarkReport) -> Result<String> {
    let rows: Vec<SummaryRow> = report
        .cells
        .iter()
        .map(|c| SummaryRow {
            model: c.model,
            target: c.target,
            mse: c.metrics.as_ref().map(|m| m.mse),
            mae: c.metrics.as_ref().map(|m| m.mae),
            r2: c.metrics.as_ref().map(|m| m.r2),
            mape: c.metrics.as_ref().map(|m| m.mape),
            n_excluded: c.metrics.as_ref().map(|m| m.n_excluded),
            accuracy_5: c.accuracy_5,
            accuracy_10: c.accuracy_10,
            failure: c.failure.as_ref().map(|f| format!("{}: {}", f.stage, f.message)),
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&rows)?;
    s.push('\n');
    Ok(s)
}

fn md(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.2}")).unwrap_or_else(|| "—".to_string())
}

/// Accuracy tables for both targets followed by the error-metric table.
pub fn markdown_tables(report: &BenchmarkReport) -> String {
    let models = report.models();
    let mut out = String::new();
    for target in Target::ALL {
        let _ = writeln!(out, "### Accuracy within threshold ({target}, % of evaluated samples)\n");
        out.push_str("| Accuracy |");
        for m in &models {
            let _ = write!(out, " {m} |");
        }
        out.push_str("\n|---|");
        out.push_str(&"---:|".repeat(models.len()));
        out.push('\n');
        for t in ACCURACY_THRESHOLDS {
            let _ = write!(out, "| {} |", threshold_label(t));
            for m in &models {
                let v = report.cell(*m, target).and_then(|c| c.accuracy(t));
                let _ = write!(out, " {} |", v.map(|v| format!("{v:.2}%")).unwrap_or_else(|| "—".into()));
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out.push_str("### Prediction errors\n\n");
    out.push_str("| Model | Target | MSE | MAE | R² | MAPE (%) | Excluded |\n");
    out.push_str("|---|---|---:|---:|---:|---:|---:|\n");
    for c in &report.cells {
        let m = c.metrics.as_ref();
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} |",
            c.model,
            c.target,
            md(m.map(|m| m.mse)),
            md(m.map(|m| m.mae)),
            m.map(|m| format!("{:.4}", m.r2)).unwrap_or_else(|| "—".into()),
            md(m.map(|m| m.mape)),
            m.map(|m| m.n_excluded.to_string()).unwrap_or_else(|| "—".into()),
        );
    }
    let failures: Vec<_> = report.failures().collect();
    if !failures.is_empty() {
        out.push_str("\nFailed cells:\n\n");
        for c in failures {
            let f = c.failure.as_ref().expect("failed cell");
            let _ = writeln!(out, "- {}/{} ({}): {}", c.model, c.target, f.stage, f.message);
        }
    }
    out
}

fn write(dir: &Path, name: &str, body: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, body).map_err(|e| Error::io(path, e))
}

/// Write `report.json`, the table CSVs, timings and per-sample error files.
pub fn write_report_files(report: &BenchmarkReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    write(dir, REPORT_FILE, &json)?;
    write(dir, SUMMARY_FILE, &summary_csv(report))?;
    for target in Target::ALL {
        write(dir, &accuracy_file_name(target), &accuracy_csv(report, target))?;
    }
    write(dir, TIMINGS_FILE, &timings_csv(report))?;
    for c in &report.cells {
        if let Some(name) = &c.errors_file {
            write(dir, name, &render_error_series(&c.series))?;
        }
    }
    Ok(())
}

/// Read `report.json` from a run directory. Per-sample series are not
/// loaded; see [`super::read_error_series`].
pub fn load_report(dir: &Path) -> Result<BenchmarkReport> {
    let path = dir.join(REPORT_FILE);
    let body = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_slice(&body).map_err(|e| Error::data(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{read_error_series, run_benchmark, BenchmarkConfig};
    use crate::metrics::accuracy_within_masked;

    fn small_report(dir: &Path) -> BenchmarkReport {
        let mut cfg = BenchmarkConfig {
            synthetic_rows: Some(500),
            models: vec![ModelKind::Gbrt, ModelKind::Catboost],
            out_dir: Some(dir.to_path_buf()),
            ..Default::default()
        };
        cfg.model_configs.gbrt.n_trees = 10;
        cfg.model_configs.catboost.n_trees = 10;
        run_benchmark(&cfg).unwrap()
    }

    #[test]
    fn files_round_trip_and_rerender_identically() {
        let dir = tempfile::tempdir().unwrap();
        let report = small_report(dir.path());
        let loaded = load_report(dir.path()).unwrap();
        assert_eq!(loaded.cells.len(), report.cells.len());
        let on_disk = std::fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap();
        assert_eq!(summary_csv(&loaded), on_disk);
        let acc = std::fs::read_to_string(dir.path().join("accuracy_price.csv")).unwrap();
        assert_eq!(accuracy_csv(&loaded, Target::Price), acc);
        assert_eq!(acc.lines().next().unwrap(), "threshold,catboost,gbrt");
        assert!(acc.lines().nth(1).unwrap().starts_with("±5%,"));
        assert!(acc.lines().nth(2).unwrap().starts_with("±10%,"));
    }

    #[test]
    fn accuracy_recomputed_from_error_table_matches() {
        let dir = tempfile::tempdir().unwrap();
        let report = small_report(dir.path());
        for c in &report.cells {
            let rows = read_error_series(&dir.path().join(c.errors_file.as_ref().unwrap())).unwrap();
            let y: Vec<f64> = rows.iter().map(|r| r.actual).collect();
            let p: Vec<Option<f64>> = rows.iter().map(|r| r.predicted).collect();
            assert_eq!(Some(accuracy_within_masked(&y, &p, 0.05).unwrap()), c.accuracy_5);
            assert_eq!(Some(accuracy_within_masked(&y, &p, 0.10).unwrap()), c.accuracy_10);
        }
    }

    #[test]
    fn markdown_has_threshold_rows() {
        let dir = tempfile::tempdir().unwrap();
        let md = markdown_tables(&small_report(dir.path()));
        assert!(md.contains("| Accuracy | catboost | gbrt |"));
        assert!(md.contains("| ±5% |") && md.contains("| ±10% |"));
    }
}
