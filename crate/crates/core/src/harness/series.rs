//! Per-sample error tables.

use std::path::Path;

use crate::dataset::{format_timestamp, parse_timestamp, Timestamp};
use crate::error::{Error, Result};
use crate::metrics::NEAR_ZERO_CUTOFF;

pub const ERROR_SERIES_HEADER: &str = "timestamp,actual,predicted,error,relative_error,excluded";

/// One test row. `error` is signed `ŷ - y`, so a positive mean means the
/// model overestimates.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub timestamp: Timestamp,
    pub actual: f64,
    pub predicted: Option<f64>,
    pub error: Option<f64>,
    /// `(ŷ - y) / |y|`; absent when the row is excluded.
    pub relative_error: Option<f64>,
    /// No prediction, or `|y|` below the near-zero cutoff.
    pub excluded: bool,
}

pub fn error_series(actual: &[f64], predicted: &[Option<f64>], timestamps: &[Timestamp]) -> Result<Vec<ErrorRow>> {
    if actual.len() != predicted.len() || actual.len() != timestamps.len() {
        return Err(Error::numeric(format!(
            "error series: length mismatch (actual {}, predicted {}, timestamps {})",
            actual.len(),
            predicted.len(),
            timestamps.len()
        )));
    }
    Ok(actual
        .iter()
        .zip(predicted)
        .zip(timestamps)
        .map(|((&y, &p), &ts)| {
            let error = p.map(|p| p - y);
            let eligible = p.is_some() && y.abs() >= NEAR_ZERO_CUTOFF;
            ErrorRow {
                timestamp: ts,
                actual: y,
                predicted: p,
                error,
                relative_error: error.filter(|_| eligible).map(|e| e / y.abs()),
                excluded: !eligible,
            }
        })
        .collect())
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub(crate) fn render_error_series(rows: &[ErrorRow]) -> String {
    let mut out = String::from(ERROR_SERIES_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            format_timestamp(&r.timestamp),
            r.actual,
            opt(r.predicted),
            opt(r.error),
            opt(r.relative_error),
            r.excluded
        ));
    }
    out
}

pub fn read_error_series(path: &Path) -> Result<Vec<ErrorRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>().join(",") != ERROR_SERIES_HEADER {
        return Err(Error::data(format!("{}: unexpected error-series header", path.display())));
    }
    let bad = |row: usize, col: &str| Error::data(format!("{}: row {row}: bad value in column {col}", path.display()));
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let row = i + 2;
        let num = |k: usize, name: &str| -> Result<Option<f64>> {
            let s = rec.get(k).unwrap_or("");
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(row, name))
            }
        };
        rows.push(ErrorRow {
            timestamp: parse_timestamp(rec.get(0).unwrap_or("")).ok_or_else(|| bad(row, "timestamp"))?,
            actual: num(1, "actual")?.ok_or_else(|| bad(row, "actual"))?,
            predicted: num(2, "predicted")?,
            error: num(3, "error")?,
            relative_error: num(4, "relative_error")?,
            excluded: rec.get(5).unwrap_or("").parse().map_err(|_| bad(row, "excluded"))?,
        });
    }
    Ok(rows)
}
