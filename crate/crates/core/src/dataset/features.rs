use std::f64::consts::TAU;

use chrono::{Datelike, Timelike};

use super::{FeatureTable, RawSeries};
use crate::error::{Error, Result};

pub const LAGS: [usize; 5] = [1, 3, 6, 12, 24];
pub const ROLLING_WINDOWS: [usize; 3] = [6, 12, 24];
/// Longest lookback of any feature; this many leading rows are dropped.
pub const LOOKBACK: usize = 24;

fn days_in_month(year: i32, month: u32) -> u32 {
    let (ny, nm) = if month == 12 { (year + 1, 1) } else { (year, month + 1) };
    let first_next = chrono::NaiveDate::from_ymd_opt(ny, nm, 1).expect("valid date");
    first_next.pred_opt().expect("valid date").day()
}

/// Mean, population std and minimum of `xs[t - w .. t]`.
fn trailing_stats(xs: &[f64], t: usize, w: usize) -> (f64, f64, f64) {
    let win = &xs[t - w..t];
    let n = w as f64;
    let mean = win.iter().sum::<f64>() / n;
    let var = win.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let min = win.iter().copied().fold(f64::INFINITY, f64::min);
    // fold(min) silently skips NaN; keep missing values visible to clean().
    let min = if win.iter().any(|x| x.is_nan()) { f64::NAN } else { min };
    (mean, var.sqrt(), min)
}

/// Engineer lag, rolling-window, calendar, interaction and predispatch
/// features. Every feature at row `t` reads raw values at `t - 1` or earlier,
/// except the same-row predispatch columns and the calendar encodings.
pub fn build_features(raw: &RawSeries) -> Result<FeatureTable> {
    let n = raw.len();
    if n < 2 * LOOKBACK {
        return Err(Error::data(format!(
            "series has {n} rows; feature building needs at least {}",
            2 * LOOKBACK
        )));
    }
    let rows = LOOKBACK..n;
    let mut names: Vec<String> = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut push = |name: String, col: Vec<f64>| {
        names.push(name);
        columns.push(col);
    };

    for (label, xs) in [("price", &raw.price), ("demand", &raw.demand)] {
        for k in LAGS {
            push(format!("{label}_lag_{k}"), rows.clone().map(|t| xs[t - k]).collect());
        }
        for w in ROLLING_WINDOWS {
            let stats: Vec<_> = rows.clone().map(|t| trailing_stats(xs, t, w)).collect();
            push(format!("{label}_roll_mean_{w}"), stats.iter().map(|s| s.0).collect());
            push(format!("{label}_roll_std_{w}"), stats.iter().map(|s| s.1).collect());
            push(format!("{label}_roll_min_{w}"), stats.iter().map(|s| s.2).collect());
        }
    }

    let ts = &raw.timestamps;
    let hour = |t: usize| {
        let x = ts[t];
        f64::from(x.hour()) + f64::from(x.minute()) / 60.0 + f64::from(x.second()) / 3600.0
    };
    let dow = |t: usize| f64::from(ts[t].weekday().num_days_from_monday());
    let dom = |t: usize| {
        let x = ts[t];
        (f64::from(x.day0()), f64::from(days_in_month(x.year(), x.month())))
    };
    push("hour_sin".into(), rows.clone().map(|t| (TAU * hour(t) / 24.0).sin()).collect());
    push("hour_cos".into(), rows.clone().map(|t| (TAU * hour(t) / 24.0).cos()).collect());
    push("dow_sin".into(), rows.clone().map(|t| (TAU * dow(t) / 7.0).sin()).collect());
    push("dow_cos".into(), rows.clone().map(|t| (TAU * dow(t) / 7.0).cos()).collect());
    push(
        "dom_sin".into(),
        rows.clone().map(|t| { let (d, m) = dom(t); (TAU * d / m).sin() }).collect(),
    );
    push(
        "dom_cos".into(),
        rows.clone().map(|t| { let (d, m) = dom(t); (TAU * d / m).cos() }).collect(),
    );

    push(
        "price_x_demand_lag1".into(),
        rows.clone().map(|t| raw.price[t - 1] * raw.demand[t - 1]).collect(),
    );

    for (label, xs) in [("price", &raw.price), ("demand", &raw.demand)] {
        let stats: Vec<_> = rows.clone().map(|t| trailing_stats(xs, t, LOOKBACK)).collect();
        push(format!("{label}_win24_mean"), stats.iter().map(|s| s.0).collect());
        push(format!("{label}_win24_std"), stats.iter().map(|s| s.1).collect());
    }

    for (name, xs) in &raw.predispatch {
        push(name.clone(), xs[rows.clone()].to_vec());
    }

    Ok(FeatureTable {
        column_names: names,
        columns,
        target_price: raw.price[rows.clone()].to_vec(),
        target_demand: raw.demand[rows.clone()].to_vec(),
        timestamps: ts[rows].to_vec(),
        dropped_columns: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{gen_synthetic, Timestamp};
    use approx::assert_abs_diff_eq;
    use chrono::{Duration, TimeZone};

    fn ramp(n: usize) -> RawSeries {
        let start: Timestamp = chrono::FixedOffset::east_opt(0)
            .unwrap()
            .with_ymd_and_hms(2023, 5, 1, 0, 0, 0)
            .unwrap();
        RawSeries {
            timestamps: (0..n).map(|i| start + Duration::hours(i as i64)).collect(),
            price: (1..=n).map(|v| v as f64).collect(),
            demand: (1..=n).map(|v| 100.0 + v as f64).collect(),
            predispatch: Vec::new(),
        }
    }

    #[test]
    fn lag_one_is_previous_price() {
        let raw = ramp(60);
        let t = build_features(&raw).unwrap();
        let lag = t.column("price_lag_1").unwrap();
        for (i, v) in lag.iter().enumerate() {
            assert_eq!(*v, raw.price[i + LOOKBACK - 1]);
        }
        assert_eq!(t.target_price[0], raw.price[LOOKBACK]);
        assert_eq!(t.n_rows(), 60 - LOOKBACK);
    }

    #[test]
    fn hour_six_is_quarter_cycle() {
        let raw = ramp(60);
        let t = build_features(&raw).unwrap();
        // Row 0 of the table is raw hour 24 = 00:00 next day; hour 6 is row 6.
        let i = (0..t.n_rows()).find(|&i| t.timestamps[i].hour() == 6).unwrap();
        assert_abs_diff_eq!(t.column("hour_sin").unwrap()[i], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.column("hour_cos").unwrap()[i], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rolling_mean_excludes_current_row() {
        // Prices 1..=6 precede the seventh row, so its trailing 6-mean is 3.5.
        let raw = ramp(60);
        let mean6 = trailing_stats(&raw.price, 6, 6).0;
        assert_abs_diff_eq!(mean6, 3.5, epsilon = 1e-12);
        let t = build_features(&raw).unwrap();
        let col = t.column("price_roll_mean_6").unwrap();
        // Table row 0 is raw row 24, whose window is prices 19..=24.
        assert_abs_diff_eq!(col[0], 21.5, epsilon = 1e-12);
    }

    #[test]
    fn column_names_unique_and_predispatch_passed_through() {
        let raw = gen_synthetic(300, 3).unwrap();
        let t = build_features(&raw).unwrap();
        let mut names = t.column_names.clone();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), t.column_names.len());
        for p in crate::dataset::PREDISPATCH_COLUMNS {
            assert!(t.column_index(p).is_some(), "{p}");
        }
        assert_eq!(t.n_cols(), 2 * (5 + 9) + 6 + 1 + 4 + 4);
    }

    #[test]
    fn too_short_series_is_rejected() {
        assert!(matches!(build_features(&ramp(47)), Err(Error::Data(_))));
        assert!(build_features(&ramp(48)).is_ok());
    }

    #[test]
    fn future_rows_do_not_leak_into_features() {
        let raw = gen_synthetic(400, 11).unwrap();
        let base = build_features(&raw).unwrap();
        let cut = 250;
        let mut perturbed = raw.clone();
        for i in cut..raw.len() {
            perturbed.price[i] += 1000.0;
            perturbed.demand[i] *= 3.0;
            for (_, c) in perturbed.predispatch.iter_mut() {
                c[i] -= 77.0;
            }
        }
        let t2 = build_features(&perturbed).unwrap();
        // Table row r has target time raw row r + LOOKBACK; rows with target
        // time < cut see only unchanged raw values.
        for r in 0..(cut - LOOKBACK) {
            for j in 0..base.n_cols() {
                assert_eq!(base.columns[j][r].to_bits(), t2.columns[j][r].to_bits());
            }
        }
        // The row whose target is the first perturbed one changes only through
        // same-row predispatch columns.
        let r = cut - LOOKBACK;
        for j in 0..base.n_cols() {
            let same = base.columns[j][r].to_bits() == t2.columns[j][r].to_bits();
            let is_pre = base.column_names[j].starts_with("pred_");
            assert!(same || is_pre, "{}", base.column_names[j]);
        }
    }

    #[test]
    fn days_in_month_handles_leap_years() {
        assert_eq!(days_in_month(2024, 2), 29);
        assert_eq!(days_in_month(2023, 2), 28);
        assert_eq!(days_in_month(2023, 12), 31);
    }
}
