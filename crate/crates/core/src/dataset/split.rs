use serde::{Deserialize, Serialize};

use super::{FeatureTable, Target, TARGET_DEMAND, TARGET_PRICE};
use crate::error::{Error, Result};

/// Split rows in time order: the first `floor(ratio * n)` rows train.
pub fn chronological_split(
    table: &FeatureTable,
    ratio: f64,
) -> Result<(FeatureTable, FeatureTable)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::config(format!("split ratio {ratio} outside (0, 1)")));
    }
    let n = table.n_rows();
    if n < 10 {
        return Err(Error::data(format!("{n} rows is too few to split (need 10)")));
    }
    let train_end = (ratio * n as f64).floor() as usize;
    if train_end == 0 || train_end == n {
        return Err(Error::data(format!(
            "ratio {ratio} on {n} rows leaves an empty train or test set"
        )));
    }
    Ok((table.slice_rows(0..train_end), table.slice_rows(train_end..n)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnRange {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

impl ColumnRange {
    fn fit(name: &str, values: &[f64]) -> Self {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        ColumnRange {
            name: name.to_string(),
            min,
            max,
        }
    }

    /// Scale to `[0, 1]` over the fitted range; values outside are not clipped.
    pub fn apply(&self, x: f64) -> f64 {
        let span = self.max - self.min;
        if span == 0.0 {
            0.0
        } else {
            (x - self.min) / span
        }
    }

    pub fn invert(&self, x: f64) -> f64 {
        let span = self.max - self.min;
        if span == 0.0 {
            self.min
        } else {
            x * span + self.min
        }
    }
}

/// Per-column min/max, fitted on training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub features: Vec<ColumnRange>,
    pub target_price: ColumnRange,
    pub target_demand: ColumnRange,
}

pub fn fit_minmax(train: &FeatureTable) -> Result<NormalizationParams> {
    if train.n_rows() == 0 {
        return Err(Error::data("cannot fit normalization on zero rows"));
    }
    Ok(NormalizationParams {
        features: train
            .column_names
            .iter()
            .zip(&train.columns)
            .map(|(n, c)| ColumnRange::fit(n, c))
            .collect(),
        target_price: ColumnRange::fit(TARGET_PRICE, &train.target_price),
        target_demand: ColumnRange::fit(TARGET_DEMAND, &train.target_demand),
    })
}

impl NormalizationParams {
    pub fn range(&self, column: &str) -> Result<&ColumnRange> {
        match column {
            TARGET_PRICE => Ok(&self.target_price),
            TARGET_DEMAND => Ok(&self.target_demand),
            _ => self
                .features
                .iter()
                .find(|r| r.name == column)
                .ok_or_else(|| Error::data(format!("unknown column: {column}"))),
        }
    }

    pub fn target_range(&self, target: Target) -> &ColumnRange {
        match target {
            Target::Price => &self.target_price,
            Target::Demand => &self.target_demand,
        }
    }

    /// Scale features and both targets of `table`.
    pub fn apply(&self, table: &FeatureTable) -> Result<FeatureTable> {
        let mut out = table.clone();
        for (name, col) in out.column_names.iter().zip(out.columns.iter_mut()) {
            let r = self.range(name)?;
            col.iter_mut().for_each(|v| *v = r.apply(*v));
        }
        out.target_price.iter_mut().for_each(|v| *v = self.target_price.apply(*v));
        out.target_demand.iter_mut().for_each(|v| *v = self.target_demand.apply(*v));
        Ok(out)
    }

    /// Map scaled values of `column` back to original units.
    pub fn invert(&self, values: &[f64], column: &str) -> Result<Vec<f64>> {
        let r = self.range(column)?;
        Ok(values.iter().map(|v| r.invert(*v)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Rng;
    use chrono::TimeZone;

    fn table(n: usize, cols: Vec<(&str, Vec<f64>)>) -> FeatureTable {
        let t0 = chrono::FixedOffset::east_opt(34200)
            .unwrap()
            .with_ymd_and_hms(2023, 1, 1, 0, 0, 0)
            .unwrap();
        FeatureTable {
            column_names: cols.iter().map(|c| c.0.to_string()).collect(),
            columns: cols.into_iter().map(|c| c.1).collect(),
            target_price: (0..n).map(|i| i as f64 - 3.0).collect(),
            target_demand: (0..n).map(|i| 100.0 + 2.0 * i as f64).collect(),
            timestamps: (0..n).map(|i| t0 + chrono::Duration::minutes(30 * i as i64)).collect(),
            dropped_columns: Vec::new(),
        }
    }

    fn rows(n: usize) -> FeatureTable {
        table(n, vec![("x", (0..n).map(|i| i as f64).collect())])
    }

    #[test]
    fn split_sizes() {
        let (tr, te) = chronological_split(&rows(100), 0.85).unwrap();
        assert_eq!((tr.n_rows(), te.n_rows()), (85, 15));
        let (tr, te) = chronological_split(&rows(10), 0.5).unwrap();
        assert_eq!((tr.n_rows(), te.n_rows()), (5, 5));
        assert!(tr.timestamps.last().unwrap() < te.timestamps.first().unwrap());
    }

    #[test]
    fn split_floor_on_small_tables() {
        // floor(0.85 * 7) = 5; seven rows fail the ten-row minimum, so the
        // arithmetic is checked on the boundary formula directly.
        assert_eq!((0.85f64 * 7.0).floor() as usize, 5);
        let (tr, te) = chronological_split(&rows(13), 0.85).unwrap();
        assert_eq!((tr.n_rows(), te.n_rows()), (11, 2));
    }

    #[test]
    fn split_errors() {
        assert!(matches!(chronological_split(&rows(9), 0.85), Err(Error::Data(_))));
        assert!(chronological_split(&rows(20), 1.0).is_err());
        assert!(chronological_split(&rows(20), 0.0).is_err());
        assert!(chronological_split(&rows(20), 0.01).is_err());
    }

    #[test]
    fn minmax_examples() {
        let t = table(3, vec![("a", vec![2.0, 4.0, 6.0]), ("c", vec![5.0; 3])]);
        let p = fit_minmax(&t).unwrap();
        assert_eq!((p.features[0].min, p.features[0].max), (2.0, 6.0));
        assert_eq!((p.features[1].min, p.features[1].max), (5.0, 5.0));

        let r = ColumnRange { name: "z".into(), min: 0.0, max: 10.0 };
        assert_eq!(r.apply(5.0), 0.5);
        assert_eq!(r.apply(12.0), 1.2);

        let s = p.apply(&t).unwrap();
        assert_eq!(s.columns[1], vec![0.0; 3]);
        assert_eq!(p.invert(&[0.0, 0.7], "c").unwrap(), vec![5.0, 5.0]);
        assert!(p.invert(&[0.0], "nope").is_err());
    }

    #[test]
    fn params_ignore_test_rows() {
        let full = rows(40);
        let (train, _) = chronological_split(&full, 0.85).unwrap();
        let p1 = fit_minmax(&train).unwrap();
        let p2 = fit_minmax(&full.slice_rows(0..train.n_rows())).unwrap();
        assert_eq!(serde_json::to_string(&p1).unwrap(), serde_json::to_string(&p2).unwrap());
    }

    #[test]
    fn normalized_train_in_unit_interval() {
        let mut rng = Rng::new(3);
        let n = 50;
        let t = table(n, vec![("a", (0..n).map(|_| rng.normal() * 40.0).collect())]);
        let (train, _) = chronological_split(&t, 0.85).unwrap();
        let p = fit_minmax(&train).unwrap();
        let s = p.apply(&train).unwrap();
        for v in s.columns[0].iter().chain(&s.target_price).chain(&s.target_demand) {
            assert!((0.0..=1.0).contains(v));
        }
    }

    #[test]
    fn round_trip_on_random_columns() {
        let mut rng = Rng::new(17);
        for _ in 0..100 {
            let lo = rng.uniform_range(-1e3, 1e3);
            let r = ColumnRange { name: "r".into(), min: lo, max: lo + rng.uniform_range(1e-3, 1e3) };
            for _ in 0..100 {
                let x = rng.uniform_range(-2e3, 2e3);
                let back = r.invert(r.apply(x));
                assert!((back - x).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }
    }
}
