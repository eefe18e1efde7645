//! Short-term electricity price and demand forecasting benchmark.
//!
//! One data pipeline ([`dataset`]), six regressors behind a single
//! fit/predict contract ([`models`]), one metric suite ([`metrics`]) and an
//! orchestrator that runs every model on both targets ([`harness`]).

// `!(x > 0.0)` is used on purpose so NaN fails validation; index loops
// mirror the matrix notation of the gradient and kernel code.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dataset;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod models;
pub mod numeric;

pub use dataset::{FeatureTable, NormalizationParams, RawSeries, Target};
pub use error::{Error, Result};
pub use harness::{run_benchmark, BenchmarkConfig, BenchmarkReport};
pub use metrics::{accuracy_within, compute_metrics, MetricsRecord};
pub use models::{ModelConfig, ModelKind, RegressorModel};
