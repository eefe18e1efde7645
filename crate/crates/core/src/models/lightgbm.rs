//! Histogram-based boosting with leaf-wise growth and gradient-based
//! one-side sampling (GOSS).

use serde::{Deserialize, Serialize};

use super::binning::BinnedMatrix;
use super::tree::{split_gain, strictly_better, Node, Tree, TreeEnsemble};
use crate::error::{Error, Result};
use crate::numeric::{mean, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LightGbmConfig {
    pub n_trees: usize,
    pub max_leaves: usize,
    pub learning_rate: f64,
    pub bins: usize,
    /// Fraction of rows with the largest |gradient| always kept.
    pub goss_a: f64,
    /// Fraction of rows sampled from the remainder.
    pub goss_b: f64,
    /// When false every row is used with unit weight.
    pub goss: bool,
    pub min_data_in_leaf: usize,
    pub l2: f64,
}

impl Default for LightGbmConfig {
    fn default() -> Self {
        LightGbmConfig {
            n_trees: 300,
            max_leaves: 31,
            learning_rate: 0.1,
            bins: 255,
            goss_a: 0.2,
            goss_b: 0.1,
            goss: true,
            min_data_in_leaf: 20,
            l2: 0.0,
        }
    }
}

impl LightGbmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 {
            return Err(Error::config("lightgbm: bins must be at least 2"));
        }
        if !(self.goss_a > 0.0 && self.goss_a <= 1.0) {
            return Err(Error::config("lightgbm: goss_a must lie in (0, 1]"));
        }
        if !(self.goss_b >= 0.0 && self.goss_b <= 1.0 - self.goss_a + 1e-12) {
            return Err(Error::config("lightgbm: goss_b must lie in [0, 1 - goss_a]"));
        }
        if self.max_leaves < 2 {
            return Err(Error::config("lightgbm: max_leaves must be at least 2"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::config("lightgbm: learning_rate must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Best split found from a histogram: rows with `bin <= bin` go left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub bin: usize,
    pub threshold: f64,
    pub gain: f64,
}

#[derive(Clone, Copy, Default)]
struct Bucket {
    g: f64,
    h: f64,
    n: usize,
}

/// Build per-feature gradient histograms over `rows` and return the best
/// split. `grad`/`hess` are already weighted.
pub fn best_histogram_split(
    binned: &BinnedMatrix,
    grad: &[f64],
    hess: &[f64],
    rows: &[u32],
    min_data_in_leaf: usize,
    l2: f64,
) -> Option<SplitCandidate> {
    let g_total: f64 = rows.iter().map(|&i| grad[i as usize]).sum();
    let h_total: f64 = rows.iter().map(|&i| hess[i as usize]).sum();
    let n_total = rows.len();
    let min_leaf = min_data_in_leaf.max(1);
    let mut best: Option<SplitCandidate> = None;
    let mut hist: Vec<Bucket> = Vec::new();
    for (f, (bins, mapper)) in binned.bins.iter().zip(&binned.mappers).enumerate() {
        let nb = mapper.n_bins();
        hist.clear();
        hist.resize(nb, Bucket::default());
        for &i in rows {
            let b = &mut hist[bins[i as usize] as usize];
            b.g += grad[i as usize];
            b.h += hess[i as usize];
            b.n += 1;
        }
        let (mut gl, mut hl, mut nl) = (0.0, 0.0, 0usize);
        for (k, bucket) in hist.iter().enumerate().take(nb - 1) {
            gl += bucket.g;
            hl += bucket.h;
            nl += bucket.n;
            if bucket.n == 0 || nl < min_leaf || n_total - nl < min_leaf {
                continue;
            }
            let gain = split_gain(gl, hl, g_total - gl, h_total - hl, l2);
            let current = best.map_or(0.0, |b| b.gain);
            if gain > 0.0 && strictly_better(gain, current) {
                best = Some(SplitCandidate {
                    feature: f,
                    bin: k,
                    threshold: mapper.thresholds[k],
                    gain,
                });
            }
        }
    }
    best
}

/// Rows and weights used for one boosting iteration.
fn goss_sample(grad: &[f64], cfg: &LightGbmConfig, rng: &mut Rng) -> (Vec<u32>, Vec<f64>) {
    let n = grad.len();
    if !cfg.goss {
        return ((0..n as u32).collect(), vec![1.0; n]);
    }
    let top = ((cfg.goss_a * n as f64).round() as usize).clamp(1, n);
    let mut order: Vec<u32> = (0..n as u32).collect();
    // Stable: ties in |g| keep index order.
    order.sort_by(|a, b| grad[*b as usize].abs().total_cmp(&grad[*a as usize].abs()));
    let mut weight = vec![0.0; n];
    for &i in &order[..top] {
        weight[i as usize] = 1.0;
    }
    let rest = &mut order[top..];
    let take = ((cfg.goss_b * n as f64).round() as usize).min(rest.len());
    if take > 0 {
        let amplify = (1.0 - cfg.goss_a) / cfg.goss_b;
        for k in 0..take {
            let j = k + rng.index(rest.len() - k);
            rest.swap(k, j);
            weight[rest[k] as usize] = amplify;
        }
    }
    let rows: Vec<u32> = (0..n as u32).filter(|&i| weight[i as usize] > 0.0).collect();
    (rows, weight)
}

struct Leaf {
    node: usize,
    rows: Vec<u32>,
    best: Option<SplitCandidate>,
}

fn grow_tree(
    binned: &BinnedMatrix,
    grad: &[f64],
    hess: &[f64],
    rows: Vec<u32>,
    cfg: &LightGbmConfig,
) -> (Tree, Vec<u16>) {
    let mut nodes = vec![Node::Leaf(0.0)];
    // Split bins parallel to `nodes`, for binned traversal at training time.
    let mut split_bins: Vec<u16> = vec![0];
    let best = best_histogram_split(binned, grad, hess, &rows, cfg.min_data_in_leaf, cfg.l2);
    let mut leaves = vec![Leaf { node: 0, rows, best }];
    while leaves.len() < cfg.max_leaves {
        let mut pick: Option<usize> = None;
        for (k, leaf) in leaves.iter().enumerate() {
            if let Some(c) = leaf.best {
                let cur = pick.and_then(|p| leaves[p].best).map_or(0.0, |b| b.gain);
                if strictly_better(c.gain, cur) {
                    pick = Some(k);
                }
            }
        }
        let Some(k) = pick else { break };
        let leaf = leaves.swap_remove(k);
        let c = leaf.best.expect("picked leaf has a split");
        let bins = &binned.bins[c.feature];
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) =
            leaf.rows.iter().partition(|&&i| usize::from(bins[i as usize]) <= c.bin);
        let left = nodes.len();
        nodes.push(Node::Leaf(0.0));
        nodes.push(Node::Leaf(0.0));
        split_bins.extend([0, 0]);
        nodes[leaf.node] = Node::Split {
            feature: c.feature,
            threshold: c.threshold,
            left,
            right: left + 1,
        };
        split_bins[leaf.node] = c.bin as u16;
        for (node, rows) in [(left, left_rows), (left + 1, right_rows)] {
            let best = best_histogram_split(binned, grad, hess, &rows, cfg.min_data_in_leaf, cfg.l2);
            leaves.push(Leaf { node, rows, best });
        }
        // keep leaf order deterministic: by node id
        leaves.sort_by_key(|l| l.node);
    }
    for leaf in &leaves {
        let g: f64 = leaf.rows.iter().map(|&i| grad[i as usize]).sum();
        let h: f64 = leaf.rows.iter().map(|&i| hess[i as usize]).sum();
        let v = if h + cfg.l2 > 0.0 { -g / (h + cfg.l2) } else { 0.0 };
        nodes[leaf.node] = Node::Leaf(v);
    }
    (Tree { nodes }, split_bins)
}

fn predict_binned(tree: &Tree, split_bins: &[u16], binned: &BinnedMatrix, i: usize) -> f64 {
    let mut at = 0;
    loop {
        match tree.nodes[at] {
            Node::Leaf(v) => return v,
            Node::Split {
                feature, left, right, ..
            } => {
                at = if binned.bins[feature][i] <= split_bins[at] {
                    left
                } else {
                    right
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct LightGbmFit {
    pub ensemble: TreeEnsemble,
    pub train_mse: Vec<f64>,
}

pub fn fit_lightgbm(
    columns: &[Vec<f64>],
    y: &[f64],
    cfg: &LightGbmConfig,
    rng: &mut Rng,
) -> Result<LightGbmFit> {
    cfg.validate()?;
    if y.is_empty() {
        return Err(Error::data("lightgbm: no training rows"));
    }
    let n = y.len();
    let binned = BinnedMatrix::fit(columns, cfg.bins);
    let base = mean(y);
    let mut pred = vec![base; n];
    let mut grad = vec![0.0; n];
    let mut wg = vec![0.0; n];
    let mut trees = Vec::with_capacity(cfg.n_trees);
    let mse = |p: &[f64]| p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n as f64;
    let mut train_mse = vec![mse(&pred)];
    for _ in 0..cfg.n_trees {
        for i in 0..n {
            grad[i] = pred[i] - y[i];
        }
        let (rows, weight) = goss_sample(&grad, cfg, rng);
        for i in 0..n {
            wg[i] = grad[i] * weight[i];
        }
        let (tree, split_bins) = grow_tree(&binned, &wg, &weight, rows, cfg);
        for (i, p) in pred.iter_mut().enumerate() {
            *p += cfg.learning_rate * predict_binned(&tree, &split_bins, &binned, i);
        }
        train_mse.push(mse(&pred));
        trees.push(tree);
    }
    Ok(LightGbmFit {
        ensemble: TreeEnsemble {
            base,
            learning_rate: cfg.learning_rate,
            trees,
        },
        train_mse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> LightGbmConfig {
        LightGbmConfig {
            n_trees: 1,
            max_leaves: 2,
            learning_rate: 1.0,
            min_data_in_leaf: 1,
            goss: false,
            ..LightGbmConfig::default()
        }
    }

    #[test]
    fn single_split_matches_exact_stump() {
        let cols = vec![vec![0.0, 1.0, 2.0, 3.0]];
        let y = vec![0.0, 0.0, 1.0, 1.0];
        let fit = fit_lightgbm(&cols, &y, &small_cfg(), &mut Rng::new(1)).unwrap();
        let p: Vec<f64> = (0..4).map(|i| fit.ensemble.predict_row(&[cols[0][i]])).collect();
        assert_eq!(p, vec![0.0, 0.0, 1.0, 1.0]);
        assert!(matches!(
            fit.ensemble.trees[0].nodes[0],
            Node::Split { feature: 0, threshold, .. } if threshold == 1.5
        ));
    }

    #[test]
    fn goss_full_keep_equals_plain_boosting() {
        let mut rng = Rng::new(2);
        let n = 400;
        let cols: Vec<Vec<f64>> = (0..3).map(|_| (0..n).map(|_| rng.uniform()).collect()).collect();
        let y: Vec<f64> = (0..n).map(|i| cols[0][i] * 3.0 + cols[1][i].powi(2) + 0.1 * rng.normal()).collect();
        let degenerate = LightGbmConfig { n_trees: 30, goss_a: 1.0, goss_b: 0.0, ..Default::default() };
        let plain = LightGbmConfig { goss: false, ..degenerate.clone() };
        let a = fit_lightgbm(&cols, &y, &plain, &mut Rng::new(9)).unwrap();
        let b = fit_lightgbm(&cols, &y, &degenerate, &mut Rng::new(9)).unwrap();
        assert_eq!(a.ensemble, b.ensemble);
        assert_eq!(a.train_mse, b.train_mse);
        let sampled = LightGbmConfig { n_trees: 30, ..Default::default() };
        let c = fit_lightgbm(&cols, &y, &sampled, &mut Rng::new(9)).unwrap();
        assert_ne!(a.ensemble, c.ensemble);
        assert!(c.train_mse.last().unwrap() < &c.train_mse[0]);
    }

    #[test]
    fn leaf_budget_respected() {
        let mut rng = Rng::new(4);
        let n = 500;
        let cols: Vec<Vec<f64>> = (0..2).map(|_| (0..n).map(|_| rng.uniform()).collect()).collect();
        let y: Vec<f64> = (0..n).map(|i| (9.0 * cols[0][i]).sin() + cols[1][i]).collect();
        let cfg = LightGbmConfig { n_trees: 5, max_leaves: 7, ..Default::default() };
        let fit = fit_lightgbm(&cols, &y, &cfg, &mut rng).unwrap();
        assert!(fit.ensemble.trees.iter().all(|t| t.n_leaves() <= 7));
    }

    #[test]
    fn invalid_sampling_fractions_rejected() {
        let cols = vec![vec![0.0, 1.0]];
        let y = vec![0.0, 1.0];
        for (a, b) in [(0.0, 0.1), (0.5, 0.6), (1.2, 0.0), (0.3, -0.1)] {
            let cfg = LightGbmConfig { goss_a: a, goss_b: b, ..small_cfg() };
            assert!(matches!(fit_lightgbm(&cols, &y, &cfg, &mut Rng::new(0)), Err(Error::Config(_))));
        }
        let cfg = LightGbmConfig { bins: 1, ..small_cfg() };
        assert!(fit_lightgbm(&cols, &y, &cfg, &mut Rng::new(0)).is_err());
    }
}
