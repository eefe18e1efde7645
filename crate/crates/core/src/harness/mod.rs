//! Runs every enabled model on both targets and assembles the comparison
//! report.
//!
//! Cells are independent: each derives its own seed from the master seed,
//! model name and target, so results do not depend on scheduling or on the
//! number of worker threads. A failing cell records its stage and message
//! and the rest of the run carries on.

mod render;
mod series;
mod svg;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    build_features, chronological_split, clean, fit_minmax, gen_synthetic, load_csv, prune_correlated,
    FeatureTable, NormalizationParams, RawSeries, Target,
};
use crate::error::{Error, Result};
use crate::metrics::{accuracy_within_masked, compute_metrics_masked, MetricsRecord};
use crate::models::{
    CatBoostConfig, GbrtConfig, LightGbmConfig, ModelConfig, ModelKind, RegressorModel, SequenceConfig, SvrConfig,
};
use crate::numeric::derive_seed;

pub use render::{
    accuracy_csv, load_report, markdown_tables, summary_csv, summary_json, timings_csv, write_report_files,
    REPORT_FILE,
};
pub use series::{error_series, read_error_series, ErrorRow};
pub use svg::write_charts;

/// Accuracy thresholds reported for every cell, as fractions.
pub const ACCURACY_THRESHOLDS: [f64; 2] = [0.05, 0.10];

/// Per-model training configurations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfigs {
    pub awmlstm: SequenceConfig,
    pub catboost: CatBoostConfig,
    pub gbrt: GbrtConfig,
    pub lstm: SequenceConfig,
    pub lightgbm: LightGbmConfig,
    pub svr: SvrConfig,
}

impl ModelConfigs {
    pub fn get(&self, kind: ModelKind) -> ModelConfig {
        match kind {
            ModelKind::Awmlstm => ModelConfig::Awmlstm(self.awmlstm.clone()),
            ModelKind::Catboost => ModelConfig::Catboost(self.catboost.clone()),
            ModelKind::Gbrt => ModelConfig::Gbrt(self.gbrt.clone()),
            ModelKind::Lstm => ModelConfig::Lstm(self.lstm.clone()),
            ModelKind::Lightgbm => ModelConfig::Lightgbm(self.lightgbm.clone()),
            ModelKind::Svr => ModelConfig::Svr(self.svr.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    /// Market CSV to load; mutually exclusive with `synthetic_rows`.
    pub input: Option<PathBuf>,
    /// Generate this many synthetic rows from the master seed instead.
    pub synthetic_rows: Option<usize>,
    pub split_ratio: f64,
    pub correlation_threshold: f64,
    pub models: Vec<ModelKind>,
    pub model_configs: ModelConfigs,
    pub seed: u64,
    /// Where report files go; not part of the echoed configuration.
    #[serde(skip)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads for the cell pool (`None`: one per core). Not echoed.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            input: None,
            synthetic_rows: None,
            split_ratio: 0.85,
            correlation_threshold: 0.95,
            models: ModelKind::ALL.to_vec(),
            model_configs: ModelConfigs::default(),
            seed: 42,
            out_dir: None,
            threads: None,
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        match (&self.input, self.synthetic_rows) {
            (None, None) => return Err(Error::config("no input: give an input file or a synthetic row count")),
            (Some(_), Some(_)) => return Err(Error::config("input file and synthetic rows are mutually exclusive")),
            _ => {}
        }
        if self.models.is_empty() {
            return Err(Error::config("no models enabled"));
        }
        if !(self.correlation_threshold > 0.0 && self.correlation_threshold <= 1.0) {
            return Err(Error::config("correlation threshold must lie in (0, 1]"));
        }
        if self.threads == Some(0) {
            return Err(Error::config("threads must be at least 1"));
        }
        for kind in self.enabled_models() {
            self.model_configs.get(kind).validate()?;
        }
        Ok(())
    }

    /// Enabled models, deduplicated, in report order.
    pub fn enabled_models(&self) -> Vec<ModelKind> {
        ModelKind::ALL.into_iter().filter(|k| self.models.contains(k)).collect()
    }

    pub fn load_raw(&self) -> Result<RawSeries> {
        match (&self.input, self.synthetic_rows) {
            (Some(path), _) => load_csv(path),
            (None, Some(n)) => gen_synthetic(n, self.seed),
            (None, None) => Err(Error::config("no input: give an input file or a synthetic row count")),
        }
    }
}

/// Cleaned tables before and after scaling, split in time order.
#[derive(Debug, Clone)]
pub struct PreparedData {
    /// Original units.
    pub train: FeatureTable,
    pub test: FeatureTable,
    pub normalization: NormalizationParams,
    /// Min-max scaled with parameters fitted on `train`.
    pub train_scaled: FeatureTable,
    pub test_scaled: FeatureTable,
}

/// Features → clean → prune → chronological split → min-max fit on train.
pub fn prepare(raw: &RawSeries, split_ratio: f64, correlation_threshold: f64) -> Result<PreparedData> {
    let features = build_features(raw)?;
    let cleaned = clean(&features)?;
    let pruned = prune_correlated(&cleaned, correlation_threshold)?;
    let (train, test) = chronological_split(&pruned, split_ratio)?;
    let normalization = fit_minmax(&train)?;
    let train_scaled = normalization.apply(&train)?;
    let test_scaled = normalization.apply(&test)?;
    Ok(PreparedData {
        train,
        test,
        normalization,
        train_scaled,
        test_scaled,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub stage: String,
    pub message: String,
}

/// Outcome of one (model, target) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub model: ModelKind,
    pub target: Target,
    pub seed: u64,
    pub metrics: Option<MetricsRecord>,
    /// Percent of evaluated pairs within ±5%.
    pub accuracy_5: Option<f64>,
    /// Percent of evaluated pairs within ±10%.
    pub accuracy_10: Option<f64>,
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
    /// Per-sample error table, relative to the report directory.
    pub errors_file: Option<String>,
    pub failure: Option<CellFailure>,
    /// Fit wall-clock time; kept out of the JSON so reports are reproducible.
    #[serde(skip)]
    pub fit_seconds: f64,
    #[serde(skip)]
    pub series: Vec<ErrorRow>,
}

impl CellReport {
    pub fn is_ok(&self) -> bool {
        self.failure.is_none()
    }

    pub fn accuracy(&self, threshold: f64) -> Option<f64> {
        if threshold == ACCURACY_THRESHOLDS[0] {
            self.accuracy_5
        } else if threshold == ACCURACY_THRESHOLDS[1] {
            self.accuracy_10
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: BenchmarkConfig,
    pub n_train: usize,
    pub n_test: usize,
    pub feature_columns: Vec<String>,
    pub dropped_columns: Vec<String>,
    pub cells: Vec<CellReport>,
}

impl BenchmarkReport {
    pub fn cell(&self, model: ModelKind, target: Target) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.model == model && c.target == target)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CellReport> {
        self.cells.iter().filter(|c| !c.is_ok())
    }

    /// Models present in the report, in report order.
    pub fn models(&self) -> Vec<ModelKind> {
        ModelKind::ALL
            .into_iter()
            .filter(|k| self.cells.iter().any(|c| c.model == *k))
            .collect()
    }
}

/// Seed of one cell, independent of every other cell.
pub fn cell_seed(master: u64, model: ModelKind, target: Target) -> u64 {
    derive_seed(master, &format!("{}/{}", model.name(), target.name()))
}

pub fn errors_file_name(model: ModelKind, target: Target) -> String {
    format!("errors_{}_{}.csv", model.name(), target.name())
}

struct CellError {
    stage: &'static str,
    error: Error,
}

fn at<T>(stage: &'static str, r: Result<T>) -> std::result::Result<T, CellError> {
    r.map_err(|error| CellError { stage, error })
}

/// Fit, predict and evaluate one cell on prepared data.
pub fn run_cell(data: &PreparedData, config: &ModelConfig, target: Target, seed: u64) -> CellReport {
    let model = config.kind();
    let mut cell = CellReport {
        model,
        target,
        seed,
        metrics: None,
        accuracy_5: None,
        accuracy_10: None,
        converged: None,
        iterations: None,
        errors_file: None,
        failure: None,
        fit_seconds: 0.0,
        series: Vec::new(),
    };
    let started = Instant::now();
    let result = (|| {
        let fitted = at("fit", RegressorModel::fit(config, &data.train_scaled, target, seed));
        cell.fit_seconds = started.elapsed().as_secs_f64();
        let fitted = fitted?;
        cell.converged = Some(fitted.diagnostics.converged);
        cell.iterations = Some(fitted.diagnostics.iterations);
        let scaled = at("predict", fitted.predict(&data.test_scaled))?;
        let range = data.normalization.target_range(target);
        let predicted: Vec<Option<f64>> = scaled.iter().map(|p| p.map(|v| range.invert(v))).collect();
        if predicted.iter().flatten().any(|v| !v.is_finite()) {
            return Err(CellError {
                stage: "predict",
                error: Error::numeric("non-finite prediction"),
            });
        }
        let actual = data.test.target(target);
        let metrics = at("metrics", compute_metrics_masked(actual, &predicted))?;
        let acc5 = at("metrics", accuracy_within_masked(actual, &predicted, ACCURACY_THRESHOLDS[0]))?;
        let acc10 = at("metrics", accuracy_within_masked(actual, &predicted, ACCURACY_THRESHOLDS[1]))?;
        let series = at("metrics", error_series(actual, &predicted, &data.test.timestamps))?;
        Ok((metrics, acc5, acc10, series))
    })();
    match result {
        Ok((metrics, acc5, acc10, series)) => {
            cell.metrics = Some(metrics);
            cell.accuracy_5 = Some(acc5);
            cell.accuracy_10 = Some(acc10);
            cell.errors_file = Some(errors_file_name(model, target));
            cell.series = series;
        }
        Err(CellError { stage, error }) => {
            log::warn!("{model}/{target} failed during {stage}: {error}");
            cell.failure = Some(CellFailure {
                stage: stage.to_string(),
                message: error.to_string(),
            });
        }
    }
    cell
}

/// Run the whole benchmark; writes report files when `out_dir` is set.
pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchmarkReport> {
    config.validate()?;
    let raw = config.load_raw()?;
    let data = prepare(&raw, config.split_ratio, config.correlation_threshold)?;
    log::info!(
        "prepared {} train / {} test rows, {} features ({} pruned)",
        data.train.n_rows(),
        data.test.n_rows(),
        data.train.n_cols(),
        data.train.dropped_columns.len()
    );
    let jobs: Vec<(ModelKind, Target)> = config
        .enabled_models()
        .into_iter()
        .flat_map(|m| Target::ALL.map(|t| (m, t)))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
    let cells: Vec<CellReport> = pool.install(|| {
        jobs.par_iter()
            .map(|&(model, target)| {
                let seed = cell_seed(config.seed, model, target);
                let cell = run_cell(&data, &config.model_configs.get(model), target, seed);
                log::info!("{model}/{target}: fit in {:.1}s", cell.fit_seconds);
                cell
            })
            .collect()
    });
    let report = BenchmarkReport {
        config: config.clone(),
        n_train: data.train.n_rows(),
        n_test: data.test.n_rows(),
        feature_columns: data.train.column_names.clone(),
        dropped_columns: data.train.dropped_columns.clone(),
        cells,
    };
    if let Some(dir) = &config.out_dir {
        write_report_files(&report, dir)?;
    }
    Ok(report)
}

/// Path of a cell's error table inside a report directory.
pub fn errors_path(dir: &Path, cell: &CellReport) -> Option<PathBuf> {
    cell.errors_file.as_ref().map(|f| dir.join(f))
}
