//! Regression metrics on original-unit values.
//!
//! Relative errors use `|y|` in the denominator (prices go negative) and skip
//! actuals with `|y| < NEAR_ZERO_CUTOFF`, which would otherwise dominate MAPE.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Actuals smaller than this in magnitude are excluded from relative errors.
pub const NEAR_ZERO_CUTOFF: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub mse: f64,
    pub mae: f64,
    pub r2: f64,
    /// Percent.
    pub mape: f64,
    /// Pairs with a prediction and `|y| >= NEAR_ZERO_CUTOFF`.
    pub n_evaluated: usize,
    /// Pairs left out of the relative metrics: no prediction, or near-zero actual.
    pub n_excluded: usize,
    /// Subset of `n_excluded` that had no prediction at all.
    pub n_absent: usize,
}

pub fn compute_metrics(actual: &[f64], predicted: &[f64]) -> Result<MetricsRecord> {
    let p: Vec<Option<f64>> = predicted.iter().copied().map(Some).collect();
    compute_metrics_masked(actual, &p)
}

fn check_lengths(actual: usize, predicted: usize) -> Result<()> {
    if actual != predicted {
        return Err(Error::numeric(format!(
            "actual/predicted length mismatch ({actual} vs {predicted})"
        )));
    }
    Ok(())
}

/// Metrics over the pairs whose prediction is present.
pub fn compute_metrics_masked(actual: &[f64], predicted: &[Option<f64>]) -> Result<MetricsRecord> {
    check_lengths(actual.len(), predicted.len())?;
    let pairs: Vec<(f64, f64)> = actual
        .iter()
        .zip(predicted)
        .filter_map(|(y, p)| p.map(|p| (*y, p)))
        .collect();
    let n_absent = actual.len() - pairs.len();
    if pairs.len() < 2 {
        return Err(Error::numeric(format!(
            "need at least 2 predicted pairs, got {}",
            pairs.len()
        )));
    }
    let n = pairs.len() as f64;
    let mae = pairs.iter().map(|(y, p)| (y - p).abs()).sum::<f64>() / n;
    let ss_res = pairs.iter().map(|(y, p)| (y - p) * (y - p)).sum::<f64>();
    let mse = ss_res / n;
    let y_bar = pairs.iter().map(|(y, _)| y).sum::<f64>() / n;
    let ss_tot = pairs.iter().map(|(y, _)| (y - y_bar) * (y - y_bar)).sum::<f64>();
    let r2 = if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            return Err(Error::numeric("undefined R²: actuals have zero variance"));
        }
    } else {
        1.0 - ss_res / ss_tot
    };

    let rel: Vec<f64> = pairs
        .iter()
        .filter(|(y, _)| y.abs() >= NEAR_ZERO_CUTOFF)
        .map(|(y, p)| ((y - p) / y.abs()).abs())
        .collect();
    if rel.is_empty() {
        return Err(Error::numeric("no pairs eligible for MAPE (all actuals near zero)"));
    }
    let mape = 100.0 * rel.iter().sum::<f64>() / rel.len() as f64;

    Ok(MetricsRecord {
        mse,
        mae,
        r2,
        mape,
        n_evaluated: rel.len(),
        n_excluded: actual.len() - rel.len(),
        n_absent,
    })
}

/// Percentage of evaluated pairs whose relative error is within `threshold`.
pub fn accuracy_within(actual: &[f64], predicted: &[f64], threshold: f64) -> Result<f64> {
    let p: Vec<Option<f64>> = predicted.iter().copied().map(Some).collect();
    accuracy_within_masked(actual, &p, threshold)
}

pub fn accuracy_within_masked(
    actual: &[f64],
    predicted: &[Option<f64>],
    threshold: f64,
) -> Result<f64> {
    if !(threshold > 0.0) {
        return Err(Error::numeric(format!("accuracy threshold {threshold} must be positive")));
    }
    check_lengths(actual.len(), predicted.len())?;
    let mut evaluated = 0usize;
    let mut hits = 0usize;
    for (y, p) in actual.iter().zip(predicted) {
        let Some(p) = p else { continue };
        if y.abs() < NEAR_ZERO_CUTOFF {
            continue;
        }
        evaluated += 1;
        if (y - p).abs() / y.abs() <= threshold {
            hits += 1;
        }
    }
    if evaluated == 0 {
        return Err(Error::numeric("no pairs eligible for threshold accuracy"));
    }
    Ok(100.0 * hits as f64 / evaluated as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Rng;
    use approx::assert_abs_diff_eq;

    #[test]
    fn perfect_prediction() {
        let y = [3.0, -1.0, 7.5];
        let m = compute_metrics(&y, &y).unwrap();
        assert_eq!((m.mae, m.mse, m.mape, m.r2), (0.0, 0.0, 0.0, 1.0));
        assert_eq!(accuracy_within(&y, &y, 0.001).unwrap(), 100.0);
    }

    #[test]
    fn hand_computed_case() {
        let m = compute_metrics(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        assert_abs_diff_eq!(m.mae, 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.mse, 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.mape, 100.0 / 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.r2, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn mean_prediction_has_zero_r2() {
        let y = [1.0, 4.0, 2.0, 9.0];
        let bar = y.iter().sum::<f64>() / 4.0;
        let m = compute_metrics(&y, &[bar; 4]).unwrap();
        assert_abs_diff_eq!(m.r2, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_variance_actuals() {
        assert_eq!(compute_metrics(&[2.0, 2.0], &[2.0, 2.0]).unwrap().r2, 1.0);
        let err = compute_metrics(&[2.0, 2.0], &[2.0, 2.5]).unwrap_err();
        assert!(err.to_string().contains("undefined R²"));
    }

    #[test]
    fn near_zero_and_absent_pairs_are_excluded() {
        let y = [0.001, 10.0, 20.0, 5.0];
        let p = [Some(5.0), Some(11.0), Some(20.0), None];
        let m = compute_metrics_masked(&y, &p).unwrap();
        assert_eq!((m.n_evaluated, m.n_excluded, m.n_absent), (2, 2, 1));
        assert_abs_diff_eq!(m.mape, 5.0, epsilon = 1e-12);
        assert!(compute_metrics(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy_within(&[100.0, 100.0], &[104.0, 111.0], 0.05).unwrap(), 50.0);
        assert!(accuracy_within(&[0.001], &[5.0], 0.10).is_err());
        assert!(accuracy_within(&[1.0], &[1.0], 0.0).is_err());
        assert!(accuracy_within(&[1.0, 2.0], &[1.0], 0.1).is_err());
        // negative actuals use |y|
        assert_eq!(accuracy_within(&[-100.0], &[-96.0], 0.05).unwrap(), 100.0);
    }

    #[test]
    fn accuracy_monotone_and_permutation_invariant() {
        let mut rng = Rng::new(5);
        let y: Vec<f64> = (0..200).map(|_| rng.uniform_range(-50.0, 300.0)).collect();
        let p: Vec<f64> = y.iter().map(|v| v + rng.normal() * 20.0).collect();
        let mut last = 0.0;
        for k in 1..=50 {
            let a = accuracy_within(&y, &p, k as f64 * 0.01).unwrap();
            assert!(a >= last);
            last = a;
        }
        let perm = rng.permutation(y.len());
        let yp: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let pp: Vec<f64> = perm.iter().map(|&i| p[i]).collect();
        let a = compute_metrics(&y, &p).unwrap();
        let b = compute_metrics(&yp, &pp).unwrap();
        assert_abs_diff_eq!(a.mse, b.mse, epsilon = 1e-9);
        assert_abs_diff_eq!(a.r2, b.r2, epsilon = 1e-12);
        assert_eq!(a.n_evaluated, b.n_evaluated);
        assert!(a.r2 < 1.0);
    }
}
