use serde::{Deserialize, Serialize};

/// Relative slack under which two split gains count as tied. Ties go to the
/// lower feature index, then the lower threshold.
pub(crate) const GAIN_TIE_TOLERANCE: f64 = 1e-12;

pub(crate) fn strictly_better(gain: f64, best: f64) -> bool {
    gain > best + GAIN_TIE_TOLERANCE * best.abs()
}

/// Squared-loss split score: `G_L²/(H_L+λ) + G_R²/(H_R+λ) - G²/(H+λ)`.
#[inline]
pub(crate) fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, l2: f64) -> f64 {
    let term = |g: f64, h: f64| if h + l2 > 0.0 { g * g / (h + l2) } else { 0.0 };
    term(gl, hl) + term(gr, hr) - term(gl + gr, hl + hr)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(f64),
}

/// Binary regression tree; `x[feature] <= threshold` goes left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64) -> Self {
        Tree {
            nodes: vec![Node::Leaf(value)],
        }
    }

    pub fn predict_with(&self, x: impl Fn(usize) -> f64) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x(feature) <= threshold { left } else { right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, at: usize) -> usize {
            match t.nodes[at] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }
}

/// Additive ensemble `F(x) = base + η Σ h_m(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub base: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
}

impl TreeEnsemble {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.predict_row_upto(row, self.trees.len())
    }

    /// Prediction using only the first `m` trees.
    pub fn predict_row_upto(&self, row: &[f64], m: usize) -> f64 {
        let mut acc = self.base;
        for t in &self.trees[..m.min(self.trees.len())] {
            acc += self.learning_rate * t.predict_with(|f| row[f]);
        }
        acc
    }
}

/// Tree whose every level shares one `(feature, threshold)` test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObliviousTree {
    /// One split per level, root first.
    pub splits: Vec<(usize, f64)>,
    /// `2^depth` leaf values; bit `l` of the index is the level-`l` outcome.
    pub leaf_values: Vec<f64>,
}

impl ObliviousTree {
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        self.splits
            .iter()
            .enumerate()
            .fold(0, |acc, (l, (f, thr))| acc | (usize::from(row[*f] > *thr) << l))
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.leaf_values[self.leaf_index(row)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObliviousEnsemble {
    pub base: f64,
    pub learning_rate: f64,
    pub trees: Vec<ObliviousTree>,
}

impl ObliviousEnsemble {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.base
            + self
                .trees
                .iter()
                .map(|t| self.learning_rate * t.predict_row(row))
                .sum::<f64>()
    }
}
