//! Shared fixtures for the model-training benchmarks.

use gridcast_core::dataset::gen_synthetic;
use gridcast_core::harness::{prepare, PreparedData};

/// Synthetic series of `rows` half-hours, run through the full pipeline
/// (features, cleaning, pruning, chronological split, scaling).
pub fn fixture(rows: usize, seed: u64) -> PreparedData {
    let raw = gen_synthetic(rows, seed).expect("synthetic series");
    prepare(&raw, 0.85, 0.95).expect("pipeline on synthetic data")
}
