//! ε-insensitive support vector regression solved in the dual with
//! sequential minimal optimisation.
//!
//! The `2n` multipliers `(a_1..a_n, a*_1..a*_n)` are handled as one vector
//! `α` with labels `+1` / `-1`, so that the problem reads
//!
//! ```text
//! min ½ αᵀQα + pᵀα   s.t.  Σ label_s α_s = 0,  0 <= α_s <= C
//! Q_st = label_s label_t K(x_s, x_t),  p = (ε - y, ε + y)
//! ```
//!
//! Each step updates the maximal-violating pair chosen with second-order
//! information, which keeps `Σ(a_i - a*_i) = 0` exactly.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::mean;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    Rbf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvrConfig {
    pub kernel: Kernel,
    pub c: f64,
    pub epsilon: f64,
    /// RBF width; `None` means `1 / feature_count`.
    pub gamma: Option<f64>,
    /// Largest tolerated KKT violation at convergence.
    pub tol: f64,
    /// Iteration budget, in multiples of the training-set size.
    pub max_passes: usize,
}

impl Default for SvrConfig {
    fn default() -> Self {
        SvrConfig {
            kernel: Kernel::Rbf,
            c: 10.0,
            epsilon: 0.01,
            gamma: None,
            tol: 1e-6,
            max_passes: 100,
        }
    }
}

impl SvrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) {
            return Err(Error::config("svr: C must be positive"));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::config("svr: epsilon must be non-negative"));
        }
        if matches!(self.gamma, Some(g) if !(g > 0.0)) {
            return Err(Error::config("svr: gamma must be positive"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::config("svr: tol must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: Kernel,
    pub gamma: f64,
}

impl KernelSpec {
    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kind {
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Kernel::Rbf => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-self.gamma * d2).exp()
            }
        }
    }
}

/// Trained dual solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrSolution {
    pub kernel: KernelSpec,
    pub c: f64,
    pub epsilon: f64,
    pub bias: f64,
    /// `a_i` for every training point.
    pub alpha: Vec<f64>,
    /// `a*_i` for every training point.
    pub alpha_star: Vec<f64>,
    /// Training indices with `a_i - a*_i != 0`.
    pub support: Vec<usize>,
    pub support_vectors: Vec<Vec<f64>>,
    /// `a_i - a*_i` for each support vector.
    pub coef: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Dual objective `-½βᵀKβ - ε‖β‖₁ + yᵀβ` at the returned point.
    pub dual_objective: f64,
}

impl SvrSolution {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.bias
            + self
                .support_vectors
                .iter()
                .zip(&self.coef)
                .map(|(sv, c)| c * self.kernel.eval(sv, x))
                .sum::<f64>()
    }
}

/// Kernel rows, fully materialised for small problems and LRU-cached for
/// large ones.
struct KernelRows<'a> {
    rows: &'a [Vec<f64>],
    spec: KernelSpec,
    dense: Option<Vec<f64>>,
    cache: HashMap<usize, Vec<f64>>,
    order: VecDeque<usize>,
    capacity: usize,
}

const DENSE_LIMIT: usize = 5000;

impl<'a> KernelRows<'a> {
    fn new(rows: &'a [Vec<f64>], spec: KernelSpec) -> Self {
        let n = rows.len();
        let dense = (n <= DENSE_LIMIT).then(|| {
            let mut k = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let v = spec.eval(&rows[i], &rows[j]);
                    k[i * n + j] = v;
                    k[j * n + i] = v;
                }
            }
            k
        });
        KernelRows {
            rows,
            spec,
            dense,
            cache: HashMap::new(),
            order: VecDeque::new(),
            capacity: (256 * 1024 * 1024 / (8 * n.max(1))).max(2),
        }
    }

    fn diag(&self, i: usize) -> f64 {
        self.spec.eval(&self.rows[i], &self.rows[i])
    }

    fn row(&mut self, i: usize) -> &[f64] {
        let n = self.rows.len();
        if let Some(k) = &self.dense {
            return &k[i * n..(i + 1) * n];
        }
        if !self.cache.contains_key(&i) {
            if self.cache.len() >= self.capacity {
                if let Some(old) = self.order.pop_front() {
                    self.cache.remove(&old);
                }
            }
            let r: Vec<f64> = self.rows.iter().map(|x| self.spec.eval(&self.rows[i], x)).collect();
            self.cache.insert(i, r);
            self.order.push_back(i);
        }
        &self.cache[&i]
    }
}

const TAU: f64 = 1e-12;

/// Dual objective of `β = a - a*` (to be maximised).
pub fn dual_objective(beta: &[f64], kernel: &[f64], y: &[f64], epsilon: f64) -> f64 {
    let n = beta.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += beta[i] * beta[j] * kernel[i * n + j];
        }
    }
    -0.5 * quad - epsilon * beta.iter().map(|b| b.abs()).sum::<f64>()
        + beta.iter().zip(y).map(|(b, t)| b * t).sum::<f64>()
}

/// Solve the ε-SVR dual on row-major `rows`.
pub fn fit_svr(rows: &[Vec<f64>], y: &[f64], cfg: &SvrConfig) -> Result<SvrSolution> {
    cfg.validate()?;
    let n = y.len();
    if n == 0 || rows.len() != n {
        return Err(Error::data("svr: empty or misaligned training data"));
    }
    let d = rows[0].len();
    let spec = KernelSpec {
        kind: cfg.kernel,
        gamma: cfg.gamma.unwrap_or(1.0 / d.max(1) as f64),
    };
    let mut kernel = KernelRows::new(rows, spec);
    let c = cfg.c;
    let m = 2 * n;
    let label = |s: usize| if s < n { 1.0 } else { -1.0 };
    let point = |s: usize| if s < n { s } else { s - n };
    let diag: Vec<f64> = (0..n).map(|i| kernel.diag(i)).collect();

    let mut alpha = vec![0.0; m];
    let mut grad: Vec<f64> = (0..m)
        .map(|s| if s < n { cfg.epsilon - y[s] } else { cfg.epsilon + y[s - n] })
        .collect();
    let max_iter = cfg.max_passes.saturating_mul(n.max(100));
    let mut iterations = 0;
    let mut converged = false;
    let mut row_i = vec![0.0; n];

    while iterations < max_iter {
        // Maximal violator i.
        let mut gmax = f64::NEG_INFINITY;
        let mut wi = usize::MAX;
        for s in 0..m {
            let v = if label(s) > 0.0 {
                (alpha[s] < c).then(|| -grad[s])
            } else {
                (alpha[s] > 0.0).then(|| grad[s])
            };
            if let Some(v) = v {
                if v >= gmax {
                    gmax = v;
                    wi = s;
                }
            }
        }
        if wi == usize::MAX {
            converged = true;
            break;
        }
        row_i.copy_from_slice(kernel.row(point(wi)));
        let yi = label(wi);
        let qd_i = diag[point(wi)];

        // Partner j by second-order gain.
        let mut gmax2 = f64::NEG_INFINITY;
        let mut wj = usize::MAX;
        let mut best_obj = f64::INFINITY;
        for s in 0..m {
            let ys = label(s);
            let q_is = yi * ys * row_i[point(s)];
            let qd_s = diag[point(s)];
            let (violation, grad_diff, quad) = if ys > 0.0 {
                if alpha[s] <= 0.0 {
                    continue;
                }
                (grad[s], gmax + grad[s], qd_i + qd_s - 2.0 * yi * q_is)
            } else {
                if alpha[s] >= c {
                    continue;
                }
                (-grad[s], gmax - grad[s], qd_i + qd_s + 2.0 * yi * q_is)
            };
            if violation >= gmax2 {
                gmax2 = violation;
            }
            if grad_diff > 0.0 {
                let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                if obj <= best_obj {
                    best_obj = obj;
                    wj = s;
                }
            }
        }
        if gmax + gmax2 < cfg.tol || wj == usize::MAX {
            converged = true;
            break;
        }
        iterations += 1;

        let (i, j) = (wi, wj);
        let yj = label(j);
        let q_ij = yi * yj * row_i[point(j)];
        let qd_j = diag[point(j)];
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if yi != yj {
            let quad = {
                let q = qd_i + qd_j + 2.0 * q_ij;
                if q > 0.0 { q } else { TAU }
            };
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = {
                let q = qd_i + qd_j - 2.0 * q_ij;
                if q > 0.0 { q } else { TAU }
            };
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let di = alpha[i] - old_i;
        let dj = alpha[j] - old_j;
        let row_j = kernel.row(point(j));
        for s in 0..m {
            let ys = label(s);
            let k = point(s);
            grad[s] += ys * (yi * row_i[k] * di + yj * row_j[k] * dj);
        }
    }

    // Bias from free multipliers, else the midpoint of the feasible interval.
    let mut free = 0usize;
    let mut free_sum = 0.0;
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in 0..m {
        let yg = label(s) * grad[s];
        let at_upper = alpha[s] >= c;
        let at_lower = alpha[s] <= 0.0;
        if at_upper {
            if label(s) < 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else if at_lower {
            if label(s) > 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else {
            free += 1;
            free_sum += yg;
        }
    }

    // Net coefficients; splitting β back into (a, a*) enforces a·a* = 0.
    let beta: Vec<f64> = (0..n).map(|i| alpha[i] - alpha[i + n]).collect();
    let all_zero = beta.iter().all(|b| *b == 0.0);
    let bias = if all_zero {
        mean(y)
    } else if free > 0 {
        -free_sum / free as f64
    } else {
        -(ub + lb) / 2.0
    };
    let support: Vec<usize> = (0..n).filter(|&i| beta[i] != 0.0).collect();

    // Dual objective via the gradient: ½βᵀKβ = ½ Σ β_i (Kβ)_i.
    let mut kbeta = vec![0.0; n];
    for &i in &support {
        let r = kernel.row(i);
        for (k, v) in kbeta.iter_mut().enumerate() {
            *v += beta[i] * r[k];
        }
    }
    let dual = -0.5 * beta.iter().zip(&kbeta).map(|(b, k)| b * k).sum::<f64>()
        - cfg.epsilon * beta.iter().map(|b| b.abs()).sum::<f64>()
        + beta.iter().zip(y).map(|(b, t)| b * t).sum::<f64>();

    if !converged {
        log::warn!("svr: stopped after {iterations} iterations without meeting tol {}", cfg.tol);
    }
    Ok(SvrSolution {
        kernel: spec,
        c,
        epsilon: cfg.epsilon,
        bias,
        alpha: beta.iter().map(|b| b.max(0.0)).collect(),
        alpha_star: beta.iter().map(|b| (-b).max(0.0)).collect(),
        support_vectors: support.iter().map(|&i| rows[i].clone()).collect(),
        coef: support.iter().map(|&i| beta[i]).collect(),
        support,
        converged,
        iterations,
        dual_objective: dual,
    })
}
