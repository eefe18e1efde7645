//! Six regressors behind one fit/predict contract.
//!
//! Every model trains on a normalized [`FeatureTable`] for one [`Target`]
//! and predicts normalized target values. Sequence models return `None`
//! for rows without a full history window.

pub mod binning;
pub mod catboost;
pub mod gbrt;
pub mod lightgbm;
pub mod lstm;
pub mod svr;
pub mod tree;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureTable, Target};
use crate::error::{Error, Result};
use crate::numeric::Rng;

pub use catboost::{fit_catboost, CatBoostConfig};
pub use gbrt::{fit_gbrt, GbrtConfig};
pub use lightgbm::{fit_lightgbm, LightGbmConfig};
pub use lstm::{
    attention_forward, fit_sequence, lstm_cell_forward, make_windows, predict_sequence, AttentionWeights,
    LstmWeights, Network, SequenceConfig, SequenceWindow, WINDOW,
};
pub use svr::{fit_svr, Kernel, SvrConfig, SvrSolution};
pub use tree::{Node, ObliviousEnsemble, ObliviousTree, Tree, TreeEnsemble};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Awmlstm,
    Catboost,
    Gbrt,
    Lstm,
    Lightgbm,
    Svr,
}

impl ModelKind {
    /// Every model, in report column order.
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Awmlstm,
        ModelKind::Catboost,
        ModelKind::Gbrt,
        ModelKind::Lstm,
        ModelKind::Lightgbm,
        ModelKind::Svr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Awmlstm => "awmlstm",
            ModelKind::Catboost => "catboost",
            ModelKind::Gbrt => "gbrt",
            ModelKind::Lstm => "lstm",
            ModelKind::Lightgbm => "lightgbm",
            ModelKind::Svr => "svr",
        }
    }

    pub fn is_sequence(self) -> bool {
        matches!(self, ModelKind::Lstm | ModelKind::Awmlstm)
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown model: {s}")))
    }
}

/// Training configuration, tagged by model kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelConfig {
    Awmlstm(SequenceConfig),
    Catboost(CatBoostConfig),
    Gbrt(GbrtConfig),
    Lstm(SequenceConfig),
    Lightgbm(LightGbmConfig),
    Svr(SvrConfig),
}

impl ModelConfig {
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Awmlstm => ModelConfig::Awmlstm(SequenceConfig::default()),
            ModelKind::Catboost => ModelConfig::Catboost(CatBoostConfig::default()),
            ModelKind::Gbrt => ModelConfig::Gbrt(GbrtConfig::default()),
            ModelKind::Lstm => ModelConfig::Lstm(SequenceConfig::default()),
            ModelKind::Lightgbm => ModelConfig::Lightgbm(LightGbmConfig::default()),
            ModelKind::Svr => ModelConfig::Svr(SvrConfig::default()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelConfig::Awmlstm(c) | ModelConfig::Lstm(c) => c.validate(),
            ModelConfig::Catboost(c) => c.validate(),
            ModelConfig::Gbrt(c) => c.validate(),
            ModelConfig::Lightgbm(c) => c.validate(),
            ModelConfig::Svr(c) => c.validate(),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelConfig::Awmlstm(_) => ModelKind::Awmlstm,
            ModelConfig::Catboost(_) => ModelKind::Catboost,
            ModelConfig::Gbrt(_) => ModelKind::Gbrt,
            ModelConfig::Lstm(_) => ModelKind::Lstm,
            ModelConfig::Lightgbm(_) => ModelKind::Lightgbm,
            ModelConfig::Svr(_) => ModelKind::Svr,
        }
    }
}

/// Trained parameters of each model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ModelParams {
    Trees(TreeEnsemble),
    Oblivious(ObliviousEnsemble),
    Svr(SvrSolution),
    Network(Network),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// False only when an iterative solver hit its budget.
    pub converged: bool,
    /// Boosting rounds, solver iterations or epochs.
    pub iterations: usize,
    /// Training loss per round or epoch (entry 0 is the initial model for
    /// boosting).
    pub train_loss: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorModel {
    pub kind: ModelKind,
    pub config: ModelConfig,
    pub seed: u64,
    pub target: Target,
    pub feature_names: Vec<String>,
    pub params: ModelParams,
    pub diagnostics: Diagnostics,
}

const MAGIC: &str = "GRIDCAST-MODEL\nversion 1\n";

fn row_major(columns: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| columns.iter().map(|c| c[i]).collect()).collect()
}

impl RegressorModel {
    /// Train on `table` for `target`. All randomness comes from `seed`.
    pub fn fit(config: &ModelConfig, table: &FeatureTable, target: Target, seed: u64) -> Result<Self> {
        let y = table.target(target);
        let n = table.n_rows();
        if n == 0 {
            return Err(Error::data("training table has no rows"));
        }
        if table.n_cols() == 0 {
            return Err(Error::data("training table has no feature columns"));
        }
        let mut rng = Rng::new(seed);
        let (params, diagnostics) = match config {
            ModelConfig::Gbrt(cfg) => {
                let fit = fit_gbrt(&table.columns, y, cfg)?;
                (ModelParams::Trees(fit.ensemble), boosting_diagnostics(fit.train_mse))
            }
            ModelConfig::Lightgbm(cfg) => {
                let fit = fit_lightgbm(&table.columns, y, cfg, &mut rng)?;
                (ModelParams::Trees(fit.ensemble), boosting_diagnostics(fit.train_mse))
            }
            ModelConfig::Catboost(cfg) => {
                let fit = fit_catboost(&table.columns, y, cfg, &mut rng)?;
                (ModelParams::Oblivious(fit.ensemble), boosting_diagnostics(fit.train_mse))
            }
            ModelConfig::Svr(cfg) => {
                let sol = fit_svr(&row_major(&table.columns, n), y, cfg)?;
                let d = Diagnostics {
                    converged: sol.converged,
                    iterations: sol.iterations,
                    train_loss: Vec::new(),
                };
                (ModelParams::Svr(sol), d)
            }
            ModelConfig::Lstm(cfg) | ModelConfig::Awmlstm(cfg) => {
                let attention = matches!(config, ModelConfig::Awmlstm(_));
                let fit = fit_sequence(&row_major(&table.columns, n), y, cfg, attention, &mut rng)?;
                let d = Diagnostics {
                    converged: true,
                    iterations: fit.loss_history.len(),
                    train_loss: fit.loss_history,
                };
                (ModelParams::Network(fit.network), d)
            }
        };
        Ok(RegressorModel {
            kind: config.kind(),
            config: config.clone(),
            seed,
            target,
            feature_names: table.column_names.clone(),
            params,
            diagnostics,
        })
    }

    /// Normalized predictions, one per row of `table`. Columns are matched
    /// by name, so extra columns and a different order are fine.
    pub fn predict(&self, table: &FeatureTable) -> Result<Vec<Option<f64>>> {
        let mut missing = Vec::new();
        let mut columns = Vec::with_capacity(self.feature_names.len());
        for name in &self.feature_names {
            match table.column(name) {
                Some(c) => columns.push(c),
                None => missing.push(name.clone()),
            }
        }
        if !missing.is_empty() {
            return Err(Error::Schema { missing });
        }
        let n = table.n_rows();
        let rows: Vec<Vec<f64>> = (0..n).map(|i| columns.iter().map(|c| c[i]).collect()).collect();
        Ok(match &self.params {
            ModelParams::Trees(e) => rows.iter().map(|r| Some(e.predict_row(r))).collect(),
            ModelParams::Oblivious(e) => rows.iter().map(|r| Some(e.predict_row(r))).collect(),
            ModelParams::Svr(s) => rows.iter().map(|r| Some(s.predict_row(r))).collect(),
            ModelParams::Network(net) => predict_sequence(net, &rows),
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = MAGIC.as_bytes().to_vec();
        serde_json::to_writer(&mut out, self)?;
        out.push(b'\n');
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let body = bytes
            .strip_prefix(MAGIC.as_bytes())
            .ok_or_else(|| Error::data("not a gridcast model file (bad header or version)"))?;
        Ok(serde_json::from_slice(body)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Data(msg) => Error::data(format!("{}: {msg}", path.display())),
            Error::Serde(err) => Error::data(format!("{}: {err}", path.display())),
            other => other,
        })
    }
}

fn boosting_diagnostics(train_mse: Vec<f64>) -> Diagnostics {
    Diagnostics {
        converged: true,
        iterations: train_mse.len().saturating_sub(1),
        train_loss: train_mse,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Timestamp;
    use chrono::{Duration, TimeZone, Utc};

    fn table(n: usize) -> FeatureTable {
        let mut rng = Rng::new(1);
        let a: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
        let t0: Timestamp = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap().fixed_offset();
        FeatureTable {
            column_names: vec!["a".into(), "b".into()],
            target_price: a.iter().zip(&b).map(|(x, y)| x - y).collect(),
            target_demand: a.iter().map(|x| 2.0 * x).collect(),
            columns: vec![a, b],
            timestamps: (0..n).map(|i| t0 + Duration::minutes(30 * i as i64)).collect(),
            dropped_columns: vec![],
        }
    }

    fn quick(kind: ModelKind) -> ModelConfig {
        match ModelConfig::default_for(kind) {
            ModelConfig::Gbrt(c) => ModelConfig::Gbrt(GbrtConfig { n_trees: 5, ..c }),
            ModelConfig::Lightgbm(c) => ModelConfig::Lightgbm(LightGbmConfig { n_trees: 5, ..c }),
            ModelConfig::Catboost(c) => ModelConfig::Catboost(CatBoostConfig { n_trees: 5, depth: 3, ..c }),
            ModelConfig::Svr(c) => ModelConfig::Svr(c),
            ModelConfig::Lstm(c) => ModelConfig::Lstm(SequenceConfig { hidden: 3, epochs: 2, ..c }),
            ModelConfig::Awmlstm(c) => ModelConfig::Awmlstm(SequenceConfig { hidden: 3, epochs: 2, attention_size: 2, ..c }),
        }
    }

    #[test]
    fn every_kind_fits_predicts_and_round_trips() {
        let t = table(60);
        for kind in ModelKind::ALL {
            let m = RegressorModel::fit(&quick(kind), &t, Target::Price, 7).unwrap();
            let p = m.predict(&t).unwrap();
            assert_eq!(p.len(), 60);
            assert!(p.iter().flatten().all(|v| v.is_finite()));
            let expected = if kind.is_sequence() { 36 } else { 60 };
            assert_eq!(p.iter().flatten().count(), expected, "{kind}");
            let back = RegressorModel::from_bytes(&m.to_bytes().unwrap()).unwrap();
            assert_eq!(back, m);
            assert_eq!(back.predict(&t).unwrap(), p);
            let again = RegressorModel::fit(&quick(kind), &t, Target::Price, 7).unwrap();
            assert_eq!(again, m, "{kind} not deterministic");
        }
    }

    #[test]
    fn column_order_does_not_matter_but_missing_columns_do() {
        let t = table(40);
        let m = RegressorModel::fit(&quick(ModelKind::Gbrt), &t, Target::Demand, 1).unwrap();
        let mut swapped = t.clone();
        swapped.column_names.swap(0, 1);
        swapped.columns.swap(0, 1);
        assert_eq!(m.predict(&swapped).unwrap(), m.predict(&t).unwrap());
        let mut partial = t.clone();
        partial.column_names.truncate(1);
        partial.columns.truncate(1);
        match m.predict(&partial) {
            Err(Error::Schema { missing }) => assert_eq!(missing, vec!["b".to_string()]),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn zero_tree_ensemble_predicts_base() {
        let t = table(20);
        let cfg = ModelConfig::Gbrt(GbrtConfig { n_trees: 0, ..Default::default() });
        let m = RegressorModel::fit(&cfg, &t, Target::Demand, 0).unwrap();
        let base = crate::numeric::mean(&t.target_demand);
        assert!(m.predict(&t).unwrap().iter().all(|p| *p == Some(base)));
    }

    #[test]
    fn rejects_foreign_bytes() {
        assert!(RegressorModel::from_bytes(b"{\"kind\":\"gbrt\"}").is_err());
        assert!(RegressorModel::from_bytes(b"GRIDCAST-MODEL\nversion 2\n{}").is_err());
    }

    #[test]
    fn kind_names_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        }
        assert!("xgboost".parse::<ModelKind>().is_err());
    }
}
