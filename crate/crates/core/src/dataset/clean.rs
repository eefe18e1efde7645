use super::FeatureTable;
use crate::error::{Error, Result};
use crate::numeric::{mean, pearson, std_dev};

fn forward_fill(col: &mut [f64]) {
    let mut last = f64::NAN;
    for v in col.iter_mut() {
        if !v.is_finite() {
            *v = last;
        } else {
            last = *v;
        }
    }
}

/// Replace non-finite values by forward fill, drop leading rows that could
/// not be filled, then clip every feature column to mean ± 3 std.
/// Targets are filled but never clipped.
pub fn clean(table: &FeatureTable) -> Result<FeatureTable> {
    let mut t = table.clone();
    for (name, col) in t.column_names.iter().zip(t.columns.iter_mut()) {
        if col.iter().all(|v| !v.is_finite()) {
            return Err(Error::data(format!("column {name} has no valid values")));
        }
        forward_fill(col);
    }
    for (name, col) in [("price", &mut t.target_price), ("demand", &mut t.target_demand)] {
        if col.iter().all(|v| !v.is_finite()) {
            return Err(Error::data(format!("target {name} has no valid values")));
        }
        forward_fill(col);
    }

    // After forward fill only a leading block can still be missing.
    let first_complete = (0..t.n_rows())
        .find(|&i| {
            t.columns.iter().all(|c| c[i].is_finite())
                && t.target_price[i].is_finite()
                && t.target_demand[i].is_finite()
        })
        .unwrap_or(t.n_rows());
    if first_complete > 0 {
        t = t.slice_rows(first_complete..t.n_rows());
    }
    if t.n_rows() == 0 {
        return Err(Error::data("no complete rows remain after cleaning"));
    }

    for col in t.columns.iter_mut() {
        let mu = mean(col);
        let sigma = std_dev(col);
        let (lo, hi) = (mu - 3.0 * sigma, mu + 3.0 * sigma);
        if sigma == 0.0 {
            continue;
        }
        for v in col.iter_mut() {
            *v = v.clamp(lo, hi);
        }
    }
    Ok(t)
}

/// Drop the later column of every feature pair whose absolute correlation
/// exceeds `threshold`. Pairs are visited in ascending index order and
/// already-dropped columns take no further part.
pub fn prune_correlated(table: &FeatureTable, threshold: f64) -> Result<FeatureTable> {
    let n = table.n_cols();
    let mut dropped = vec![false; n];
    for i in 0..n {
        if dropped[i] {
            continue;
        }
        for j in (i + 1)..n {
            if dropped[j] {
                continue;
            }
            if pearson(&table.columns[i], &table.columns[j])?.abs() > threshold {
                dropped[j] = true;
            }
        }
    }
    let mut out = table.clone();
    out.column_names.clear();
    out.columns.clear();
    for (j, gone) in dropped.iter().enumerate() {
        if *gone {
            out.dropped_columns.push(table.column_names[j].clone());
        } else {
            out.column_names.push(table.column_names[j].clone());
            out.columns.push(table.columns[j].clone());
        }
    }
    Ok(out)
}
