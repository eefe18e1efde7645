//! Oblivious-tree boosting with ordered residuals.
//!
//! Each permutation keeps its own running approximation in which example
//! `i` has only ever been updated from examples that precede it in that
//! permutation, so the residual used for `i` never reflects its own target.
//! Tree structure is chosen on the ordered residuals of one randomly picked
//! permutation per iteration. Leaf values of the final model are then
//! fitted on the model's own residuals; averaging leaf values fitted on the
//! supporting models' residuals instead lets the final model drift away
//! from the data on spiky targets.

use serde::{Deserialize, Serialize};

use super::binning::BinnedMatrix;
use super::tree::{strictly_better, ObliviousEnsemble, ObliviousTree};
use crate::error::{Error, Result};
use crate::numeric::{mean, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CatBoostConfig {
    pub n_trees: usize,
    pub depth: usize,
    pub learning_rate: f64,
    /// Number of random permutations `s`.
    pub permutations: usize,
    /// Ordered boosting; when false residuals come from the full model.
    pub ordered: bool,
    /// L2 penalty on leaf values.
    pub l2: f64,
    pub bins: usize,
}

impl Default for CatBoostConfig {
    fn default() -> Self {
        CatBoostConfig {
            n_trees: 300,
            depth: 6,
            learning_rate: 0.1,
            permutations: 4,
            ordered: true,
            l2: 1.0,
            bins: 255,
        }
    }
}

impl CatBoostConfig {
    pub fn validate(&self) -> Result<()> {
        if self.permutations < 1 {
            return Err(Error::config("catboost: permutations must be at least 1"));
        }
        if self.depth == 0 || self.depth > 16 {
            return Err(Error::config("catboost: depth must lie in 1..=16"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::config("catboost: learning_rate must lie in (0, 1]"));
        }
        if self.l2 < 0.0 || self.bins < 2 {
            return Err(Error::config("catboost: l2 must be >= 0 and bins >= 2"));
        }
        Ok(())
    }
}

/// Choose one `(feature, bin)` per level, maximising the summed gain over
/// all current leaves. Returns splits and each row's leaf index.
fn grow_structure(
    binned: &BinnedMatrix,
    residual: &[f64],
    cfg: &CatBoostConfig,
) -> (Vec<(usize, usize)>, Vec<usize>) {
    let n = residual.len();
    let mut leaf_of = vec![0usize; n];
    let mut splits: Vec<(usize, usize)> = Vec::new();
    let term = |s: f64, c: f64| if c + cfg.l2 > 0.0 { s * s / (c + cfg.l2) } else { 0.0 };
    let mut sums = Vec::new();
    let mut counts = Vec::new();
    for level in 0..cfg.depth {
        let n_leaves = 1usize << level;
        let mut leaf_sum = vec![0.0; n_leaves];
        let mut leaf_cnt = vec![0.0; n_leaves];
        for i in 0..n {
            leaf_sum[leaf_of[i]] += residual[i];
            leaf_cnt[leaf_of[i]] += 1.0;
        }
        let parent: f64 = (0..n_leaves).map(|l| term(leaf_sum[l], leaf_cnt[l])).sum();
        let mut best: Option<(f64, usize, usize)> = None;
        for (f, bins) in binned.bins.iter().enumerate() {
            let nb = binned.mappers[f].n_bins();
            if nb < 2 {
                continue;
            }
            sums.clear();
            sums.resize(n_leaves * nb, 0.0);
            counts.clear();
            counts.resize(n_leaves * nb, 0.0);
            for i in 0..n {
                let at = leaf_of[i] * nb + bins[i] as usize;
                sums[at] += residual[i];
                counts[at] += 1.0;
            }
            let mut left_sum = vec![0.0; n_leaves];
            let mut left_cnt = vec![0.0; n_leaves];
            for k in 0..nb - 1 {
                let mut moved = false;
                for l in 0..n_leaves {
                    let c = counts[l * nb + k];
                    if c > 0.0 {
                        moved = true;
                        left_sum[l] += sums[l * nb + k];
                        left_cnt[l] += c;
                    }
                }
                if !moved {
                    continue;
                }
                let mut score = 0.0;
                for l in 0..n_leaves {
                    score += term(left_sum[l], left_cnt[l])
                        + term(leaf_sum[l] - left_sum[l], leaf_cnt[l] - left_cnt[l]);
                }
                let gain = score - parent;
                let cur = best.map_or(0.0, |b| b.0);
                if gain > 0.0 && strictly_better(gain, cur) {
                    best = Some((gain, f, k));
                }
            }
        }
        let Some((_, f, k)) = best else { break };
        for i in 0..n {
            if usize::from(binned.bins[f][i]) > k {
                leaf_of[i] |= 1 << level;
            }
        }
        splits.push((f, k));
    }
    (splits, leaf_of)
}

#[derive(Debug, Clone)]
pub struct CatBoostFit {
    pub ensemble: ObliviousEnsemble,
    pub train_mse: Vec<f64>,
}

pub fn fit_catboost(
    columns: &[Vec<f64>],
    y: &[f64],
    cfg: &CatBoostConfig,
    rng: &mut Rng,
) -> Result<CatBoostFit> {
    cfg.validate()?;
    if y.is_empty() {
        return Err(Error::data("catboost: no training rows"));
    }
    let n = y.len();
    let binned = BinnedMatrix::fit(columns, cfg.bins);
    let base = mean(y);
    let s = if cfg.ordered { cfg.permutations } else { 1 };
    let perms: Vec<Vec<usize>> = if cfg.ordered {
        (0..s).map(|_| rng.permutation(n)).collect()
    } else {
        Vec::new()
    };
    // Ordered approximations, one per permutation.
    let mut ordered_pred = vec![vec![base; n]; if cfg.ordered { s } else { 0 }];
    let mut pred = vec![base; n];
    let mut residuals = vec![vec![0.0; n]; s];
    let mse = |p: &[f64]| p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n as f64;
    let mut train_mse = vec![mse(&pred)];
    let mut trees = Vec::with_capacity(cfg.n_trees);
    let eta = cfg.learning_rate;

    for _ in 0..cfg.n_trees {
        for (r, res) in residuals.iter_mut().enumerate() {
            let approx = if cfg.ordered { &ordered_pred[r] } else { &pred };
            for i in 0..n {
                res[i] = y[i] - approx[i];
            }
        }
        let chosen = if s > 1 { rng.index(s) } else { 0 };
        let (splits, leaf_of) = grow_structure(&binned, &residuals[chosen], cfg);
        let n_leaves = 1usize << splits.len();

        if cfg.ordered {
            // Advance each supporting model along its permutation: a row
            // moves by the leaf mean of the rows before it, never its own.
            for (r, res) in residuals.iter().enumerate() {
                let mut sum = vec![0.0; n_leaves];
                let mut cnt = vec![0.0; n_leaves];
                for &i in &perms[r] {
                    let l = leaf_of[i];
                    let denom = cnt[l] + cfg.l2;
                    if denom > 0.0 {
                        ordered_pred[r][i] += eta * sum[l] / denom;
                    }
                    sum[l] += res[i];
                    cnt[l] += 1.0;
                }
            }
        }
        // Leaf values of the final model: a standard gradient step on its
        // own residuals.
        let mut sum = vec![0.0; n_leaves];
        let mut cnt = vec![0.0; n_leaves];
        for i in 0..n {
            sum[leaf_of[i]] += y[i] - pred[i];
            cnt[leaf_of[i]] += 1.0;
        }
        let leaf_values: Vec<f64> = (0..n_leaves)
            .map(|l| {
                let denom = cnt[l] + cfg.l2;
                if denom > 0.0 {
                    sum[l] / denom
                } else {
                    0.0
                }
            })
            .collect();
        for i in 0..n {
            pred[i] += eta * leaf_values[leaf_of[i]];
        }
        train_mse.push(mse(&pred));
        trees.push(ObliviousTree {
            splits: splits
                .iter()
                .map(|&(f, k)| (f, binned.mappers[f].thresholds[k]))
                .collect(),
            leaf_values,
        });
    }
    Ok(CatBoostFit {
        ensemble: ObliviousEnsemble {
            base,
            learning_rate: eta,
            trees,
        },
        train_mse,
    })
}
