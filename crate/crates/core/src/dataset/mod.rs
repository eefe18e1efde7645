//! Market data ingestion and the shared feature pipeline.
//!
//! Every model consumes the same table: engineered features built from the
//! raw price/demand series, cleaned, pruned for redundancy, split in time
//! order and min-max scaled with parameters fitted on the training rows.

mod clean;
mod features;
mod io;
mod split;
mod synthetic;

use chrono::{DateTime, FixedOffset};
use serde::{Deserialize, Serialize};

pub use clean::{clean, prune_correlated};
pub use features::{build_features, LAGS, LOOKBACK, ROLLING_WINDOWS};
pub use io::{load_csv, write_feature_csv, write_raw_csv};
pub(crate) use io::{format_timestamp, parse_timestamp};
pub use split::{chronological_split, fit_minmax, ColumnRange, NormalizationParams};
pub use synthetic::{gen_synthetic, MIN_SYNTHETIC_ROWS};

pub type Timestamp = DateTime<FixedOffset>;

/// Names of the optional predispatch columns, in canonical order.
pub const PREDISPATCH_COLUMNS: [&str; 4] = [
    "pred_price_avg32",
    "pred_price_best32",
    "pred_demand_avg32",
    "pred_demand_best32",
];

/// Column name used for each target in exports and normalization lookups.
pub const TARGET_PRICE: &str = "target_price";
pub const TARGET_DEMAND: &str = "target_demand";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Price,
    Demand,
}

impl Target {
    pub const ALL: [Target; 2] = [Target::Price, Target::Demand];

    pub fn name(self) -> &'static str {
        match self {
            Target::Price => "price",
            Target::Demand => "demand",
        }
    }

    pub fn column(self) -> &'static str {
        match self {
            Target::Price => TARGET_PRICE,
            Target::Demand => TARGET_DEMAND,
        }
    }
}

impl std::fmt::Display for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Target {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "price" => Ok(Target::Price),
            "demand" => Ok(Target::Demand),
            other => Err(crate::Error::config(format!("unknown target: {other}"))),
        }
    }
}

/// Timestamp-indexed market observations. Missing cells are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub timestamps: Vec<Timestamp>,
    pub price: Vec<f64>,
    pub demand: Vec<f64>,
    /// Predispatch columns present in the source, in [`PREDISPATCH_COLUMNS`] order.
    pub predispatch: Vec<(String, Vec<f64>)>,
}

impl RawSeries {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }
}

/// Engineered feature matrix aligned with both targets.
///
/// Stored column-major: `columns[j][i]` is feature `j` at row `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub column_names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    pub target_price: Vec<f64>,
    pub target_demand: Vec<f64>,
    pub timestamps: Vec<Timestamp>,
    /// Columns removed by correlation pruning.
    pub dropped_columns: Vec<String>,
}

impl FeatureTable {
    pub fn n_rows(&self) -> usize {
        self.timestamps.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.column_index(name).map(|j| self.columns[j].as_slice())
    }

    pub fn target(&self, target: Target) -> &[f64] {
        match target {
            Target::Price => &self.target_price,
            Target::Demand => &self.target_demand,
        }
    }

    pub fn target_mut(&mut self, target: Target) -> &mut Vec<f64> {
        match target {
            Target::Price => &mut self.target_price,
            Target::Demand => &mut self.target_demand,
        }
    }

    /// Row-major copy of the feature values of row `i`.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    /// New table holding the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureTable {
        let pick = |v: &Vec<f64>| rows.iter().map(|&i| v[i]).collect::<Vec<_>>();
        FeatureTable {
            column_names: self.column_names.clone(),
            columns: self.columns.iter().map(pick).collect(),
            target_price: pick(&self.target_price),
            target_demand: pick(&self.target_demand),
            timestamps: rows.iter().map(|&i| self.timestamps[i]).collect(),
            dropped_columns: self.dropped_columns.clone(),
        }
    }

    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> FeatureTable {
        FeatureTable {
            column_names: self.column_names.clone(),
            columns: self.columns.iter().map(|c| c[range.clone()].to_vec()).collect(),
            target_price: self.target_price[range.clone()].to_vec(),
            target_demand: self.target_demand[range.clone()].to_vec(),
            timestamps: self.timestamps[range].to_vec(),
            dropped_columns: self.dropped_columns.clone(),
        }
    }
}
