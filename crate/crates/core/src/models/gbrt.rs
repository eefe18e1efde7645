//! Gradient boosted regression trees with exact greedy split search.

use serde::{Deserialize, Serialize};

use super::binning::split_point;
use super::tree::{split_gain, strictly_better, Node, Tree, TreeEnsemble};
use crate::error::{Error, Result};
use crate::numeric::mean;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbrtConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    /// L2 penalty on leaf values.
    pub l2: f64,
}

impl Default for GbrtConfig {
    fn default() -> Self {
        GbrtConfig {
            n_trees: 300,
            max_depth: 4,
            learning_rate: 0.1,
            min_samples_leaf: 1,
            l2: 0.0,
        }
    }
}

impl GbrtConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 {
            return Err(Error::config("gbrt: max_depth must be at least 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::config("gbrt: learning_rate must lie in [0, 1]"));
        }
        if self.l2 < 0.0 {
            return Err(Error::config("gbrt: l2 must be non-negative"));
        }
        Ok(())
    }
}

/// Fitted ensemble plus the training MSE after each tree (entry 0 is the
/// constant model).
#[derive(Debug, Clone)]
pub struct GbrtFit {
    pub ensemble: TreeEnsemble,
    pub train_mse: Vec<f64>,
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct OpenNode {
    id: usize,
    sum: f64,
    count: usize,
    best: Option<Candidate>,
}

const NO_SLOT: u32 = u32::MAX;

/// Grow one depth-wise tree on `residual`, scanning presorted feature orders.
fn grow_tree(
    columns: &[Vec<f64>],
    sorted: &[Vec<u32>],
    residual: &[f64],
    cfg: &GbrtConfig,
) -> Tree {
    let n = residual.len();
    let mut nodes = vec![Node::Leaf(0.0)];
    let mut open = vec![OpenNode {
        id: 0,
        sum: residual.iter().sum(),
        count: n,
        best: None,
    }];
    let mut slot: Vec<u32> = vec![0; n];
    let leaf_value = |sum: f64, count: usize| sum / (count as f64 + cfg.l2);
    let min_leaf = cfg.min_samples_leaf.max(1);

    for _depth in 0..cfg.max_depth {
        if open.is_empty() {
            break;
        }
        let k = open.len();
        let mut left_sum = vec![0.0; k];
        let mut left_cnt = vec![0usize; k];
        let mut last = vec![0.0; k];
        for (f, order) in sorted.iter().enumerate() {
            left_sum.iter_mut().for_each(|v| *v = 0.0);
            left_cnt.iter_mut().for_each(|v| *v = 0);
            let col = &columns[f];
            for &i in order {
                let s = slot[i as usize];
                if s == NO_SLOT {
                    continue;
                }
                let s = s as usize;
                let v = col[i as usize];
                let nl = left_cnt[s];
                if nl >= min_leaf && v > last[s] && open[s].count - nl >= min_leaf {
                    let node = &open[s];
                    let gl = left_sum[s];
                    let gain = split_gain(
                        gl,
                        nl as f64,
                        node.sum - gl,
                        (node.count - nl) as f64,
                        cfg.l2,
                    );
                    let best = node.best.map_or(0.0, |b| b.gain);
                    if gain > 0.0 && strictly_better(gain, best) {
                        open[s].best = Some(Candidate {
                            gain,
                            feature: f,
                            threshold: split_point(last[s], v),
                        });
                    }
                }
                left_sum[s] += residual[i as usize];
                left_cnt[s] += 1;
                last[s] = v;
            }
        }

        let mut next_open = Vec::new();
        let mut remap = vec![NO_SLOT; k];
        let mut children = vec![(0u32, 0u32); k];
        for (s, node) in open.iter().enumerate() {
            match node.best {
                Some(c) => {
                    let left = nodes.len();
                    nodes.push(Node::Leaf(0.0));
                    nodes.push(Node::Leaf(0.0));
                    nodes[node.id] = Node::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        left,
                        right: left + 1,
                    };
                    remap[s] = 0;
                    children[s] = (next_open.len() as u32, next_open.len() as u32 + 1);
                    for id in [left, left + 1] {
                        next_open.push(OpenNode {
                            id,
                            sum: 0.0,
                            count: 0,
                            best: None,
                        });
                    }
                }
                None => nodes[node.id] = Node::Leaf(leaf_value(node.sum, node.count)),
            }
        }
        for i in 0..n {
            let s = slot[i];
            if s == NO_SLOT {
                continue;
            }
            let s = s as usize;
            if remap[s] == NO_SLOT {
                slot[i] = NO_SLOT;
                continue;
            }
            let c = open[s].best.expect("split chosen");
            let child = if columns[c.feature][i] <= c.threshold {
                children[s].0
            } else {
                children[s].1
            };
            slot[i] = child;
            let o = &mut next_open[child as usize];
            o.sum += residual[i];
            o.count += 1;
        }
        open = next_open;
    }
    for node in &open {
        nodes[node.id] = Node::Leaf(leaf_value(node.sum, node.count));
    }
    Tree { nodes }
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Fit on column-major features. Each tree fits `y - F_{m-1}(x)` and is
/// added with step `learning_rate`.
pub fn fit_gbrt(columns: &[Vec<f64>], y: &[f64], cfg: &GbrtConfig) -> Result<GbrtFit> {
    cfg.validate()?;
    if y.is_empty() {
        return Err(Error::data("gbrt: no training rows"));
    }
    let n = y.len();
    let sorted: Vec<Vec<u32>> = columns
        .iter()
        .map(|c| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|a, b| c[*a as usize].total_cmp(&c[*b as usize]));
            idx
        })
        .collect();
    let base = mean(y);
    let mut pred = vec![base; n];
    let mut residual = vec![0.0; n];
    let mut trees = Vec::with_capacity(cfg.n_trees);
    let mut train_mse = vec![mse(&pred, y)];
    for _ in 0..cfg.n_trees {
        for i in 0..n {
            residual[i] = y[i] - pred[i];
        }
        let tree = grow_tree(columns, &sorted, &residual, cfg);
        for (i, p) in pred.iter_mut().enumerate() {
            *p += cfg.learning_rate * tree.predict_with(|f| columns[f][i]);
        }
        train_mse.push(mse(&pred, y));
        trees.push(tree);
    }
    Ok(GbrtFit {
        ensemble: TreeEnsemble {
            base,
            learning_rate: cfg.learning_rate,
            trees,
        },
        train_mse,
    })
}
