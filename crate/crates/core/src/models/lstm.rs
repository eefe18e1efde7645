//! LSTM regressors over 24-step windows of engineered feature rows, with
//! an optional additive attention layer over the hidden states.
//!
//! Gradients are derived by hand (full backpropagation through time) and
//! checked against central differences in the tests.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{sigmoid, softmax_into, Rng};

/// History length consumed by the sequence models.
pub const WINDOW: usize = 24;

const GATES: usize = 4;
/// Gate blocks inside the stacked `4H` pre-activation, in this order.
pub const GATE_INPUT: usize = 0;
pub const GATE_FORGET: usize = 1;
pub const GATE_OUTPUT: usize = 2;
pub const GATE_CANDIDATE: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SequenceConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Global gradient-norm ceiling.
    pub clip: f64,
    /// Attention projection width (attention model only).
    pub attention_size: usize,
}

impl Default for SequenceConfig {
    fn default() -> Self {
        SequenceConfig {
            hidden: 32,
            epochs: 20,
            learning_rate: 3e-3,
            batch_size: 32,
            clip: 1.0,
            attention_size: 16,
        }
    }
}

impl SequenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.batch_size == 0 || self.attention_size == 0 {
            return Err(Error::config("sequence: hidden, batch_size and attention_size must be positive"));
        }
        if !(self.learning_rate > 0.0) || !(self.clip > 0.0) {
            return Err(Error::config("sequence: learning_rate and clip must be positive"));
        }
        Ok(())
    }
}

/// Stacked gate parameters. Row block `k` of `w_x` (input weights, `W`)
/// and `w_h` (recurrent weights, `U`) belongs to gate `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmWeights {
    pub input_size: usize,
    pub hidden_size: usize,
    /// `4H × D`, row-major.
    pub w_x: Vec<f64>,
    /// `4H × H`, row-major.
    pub w_h: Vec<f64>,
    /// `4H`.
    pub bias: Vec<f64>,
}

impl LstmWeights {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        LstmWeights {
            input_size,
            hidden_size,
            w_x: vec![0.0; GATES * hidden_size * input_size],
            w_h: vec![0.0; GATES * hidden_size * hidden_size],
            bias: vec![0.0; GATES * hidden_size],
        }
    }

    /// Bias block of one gate.
    pub fn gate_bias_mut(&mut self, gate: usize) -> &mut [f64] {
        let h = self.hidden_size;
        &mut self.bias[gate * h..(gate + 1) * h]
    }

    fn check_shapes(&self) -> Result<()> {
        let (d, h) = (self.input_size, self.hidden_size);
        if self.w_x.len() != GATES * h * d || self.w_h.len() != GATES * h * h || self.bias.len() != GATES * h {
            return Err(Error::numeric("lstm: weight shapes inconsistent with sizes"));
        }
        Ok(())
    }
}

/// Additive attention `e_t = vᵀ tanh(W_h h_t + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionWeights {
    pub size: usize,
    pub hidden_size: usize,
    /// `A × H`, row-major.
    pub w_h: Vec<f64>,
    pub b: Vec<f64>,
    pub v: Vec<f64>,
}

impl AttentionWeights {
    pub fn zeros(size: usize, hidden_size: usize) -> Self {
        AttentionWeights {
            size,
            hidden_size,
            w_h: vec![0.0; size * hidden_size],
            b: vec![0.0; size],
            v: vec![0.0; size],
        }
    }
}

/// One step of the standard LSTM cell.
pub fn lstm_cell_forward(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    w: &LstmWeights,
) -> Result<(Vec<f64>, Vec<f64>)> {
    w.check_shapes()?;
    let (d, h) = (w.input_size, w.hidden_size);
    if x.len() != d || h_prev.len() != h || c_prev.len() != h {
        return Err(Error::numeric(format!(
            "lstm: expected input {d} and state {h}, got {} / {} / {}",
            x.len(),
            h_prev.len(),
            c_prev.len()
        )));
    }
    let mut z = vec![0.0; GATES * h];
    preactivation(w, x, h_prev, &mut z);
    let mut h_t = vec![0.0; h];
    let mut c_t = vec![0.0; h];
    for k in 0..h {
        let i = sigmoid(z[GATE_INPUT * h + k]);
        let f = sigmoid(z[GATE_FORGET * h + k]);
        let o = sigmoid(z[GATE_OUTPUT * h + k]);
        let g = z[GATE_CANDIDATE * h + k].tanh();
        c_t[k] = f * c_prev[k] + i * g;
        h_t[k] = o * c_t[k].tanh();
    }
    Ok((h_t, c_t))
}

/// Attention over hidden states: returns the context `Σ α_t h_t` and `α`.
pub fn attention_forward(hidden: &[Vec<f64>], w: &AttentionWeights) -> Result<(Vec<f64>, Vec<f64>)> {
    if hidden.is_empty() {
        return Err(Error::numeric("attention: empty hidden-state sequence"));
    }
    let hs = w.hidden_size;
    if hidden.iter().any(|h| h.len() != hs) || w.w_h.len() != w.size * hs || w.b.len() != w.size || w.v.len() != w.size {
        return Err(Error::numeric("attention: shape mismatch"));
    }
    let scores: Vec<f64> = hidden.iter().map(|h| attention_score(w, h, None)).collect();
    let mut alpha = vec![0.0; scores.len()];
    softmax_into(&scores, &mut alpha)?;
    let mut ctx = vec![0.0; hs];
    for (a, h) in alpha.iter().zip(hidden) {
        for (c, v) in ctx.iter_mut().zip(h) {
            *c += a * v;
        }
    }
    Ok((ctx, alpha))
}

fn attention_score(w: &AttentionWeights, h: &[f64], mut u_out: Option<&mut [f64]>) -> f64 {
    let hs = w.hidden_size;
    let mut e = 0.0;
    for a in 0..w.size {
        let row = &w.w_h[a * hs..(a + 1) * hs];
        let u = (w.b[a] + dot(row, h)).tanh();
        if let Some(out) = u_out.as_deref_mut() {
            out[a] = u;
        }
        e += w.v[a] * u;
    }
    e
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn preactivation(w: &LstmWeights, x: &[f64], h_prev: &[f64], z: &mut [f64]) {
    let (d, h) = (w.input_size, w.hidden_size);
    for r in 0..GATES * h {
        z[r] = w.bias[r] + dot(&w.w_x[r * d..(r + 1) * d], x) + dot(&w.w_h[r * h..(r + 1) * h], h_prev);
    }
}

/// Full network: LSTM, optional attention, linear head on `h_T` or `[c; h_T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub lstm: LstmWeights,
    pub attention: Option<AttentionWeights>,
    pub head: Vec<f64>,
    pub head_bias: f64,
}

impl Network {
    pub fn zeros(input_size: usize, hidden: usize, attention: Option<usize>) -> Self {
        let head_len = if attention.is_some() { 2 * hidden } else { hidden };
        Network {
            lstm: LstmWeights::zeros(input_size, hidden),
            attention: attention.map(|a| AttentionWeights::zeros(a, hidden)),
            head: vec![0.0; head_len],
            head_bias: 0.0,
        }
    }

    /// Every parameter uniform in `[-1/√H, 1/√H]`.
    pub fn init(input_size: usize, hidden: usize, attention: Option<usize>, rng: &mut Rng) -> Self {
        let mut net = Network::zeros(input_size, hidden, attention);
        let bound = 1.0 / (hidden as f64).sqrt();
        for buf in net.buffers_mut() {
            for p in buf.iter_mut() {
                *p = rng.uniform_range(-bound, bound);
            }
        }
        net
    }

    pub fn hidden_size(&self) -> usize {
        self.lstm.hidden_size
    }

    fn buffers(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![&self.lstm.w_x, &self.lstm.w_h, &self.lstm.bias];
        if let Some(a) = &self.attention {
            out.extend([a.w_h.as_slice(), a.b.as_slice(), a.v.as_slice()]);
        }
        out.push(&self.head);
        out.push(std::slice::from_ref(&self.head_bias));
        out
    }

    fn buffers_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![&mut self.lstm.w_x, &mut self.lstm.w_h, &mut self.lstm.bias];
        if let Some(a) = &mut self.attention {
            out.push(&mut a.w_h);
            out.push(&mut a.b);
            out.push(&mut a.v);
        }
        out.push(&mut self.head);
        out.push(std::slice::from_mut(&mut self.head_bias));
        out
    }

    pub fn n_params(&self) -> usize {
        self.buffers().iter().map(|b| b.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.buffers().concat()
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params(), "flat parameter length");
        let mut at = 0;
        for buf in self.buffers_mut() {
            buf.copy_from_slice(&flat[at..at + buf.len()]);
            at += buf.len();
        }
    }

    pub fn is_finite(&self) -> bool {
        self.buffers().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// Prediction for one window of feature rows.
    pub fn predict(&self, window: &[Vec<f64>]) -> f64 {
        let mut trace = Trace::new(self, window.len());
        self.forward(window, &mut trace)
    }

    /// Attention weights for one window (attention model only).
    pub fn attention_weights(&self, window: &[Vec<f64>]) -> Option<Vec<f64>> {
        self.attention.as_ref()?;
        let mut trace = Trace::new(self, window.len());
        self.forward(window, &mut trace);
        Some(trace.alpha)
    }

    fn forward(&self, xs: &[Vec<f64>], tr: &mut Trace) -> f64 {
        let h = self.hidden_size();
        let t_len = xs.len();
        tr.resize(self, t_len);
        let zero = vec![0.0; h];
        for t in 0..t_len {
            let (h_prev, c_prev) = if t == 0 {
                (&zero[..], &zero[..])
            } else {
                (&tr.h[(t - 1) * h..t * h], &tr.c[(t - 1) * h..t * h])
            };
            preactivation(&self.lstm, &xs[t], h_prev, &mut tr.z);
            for k in 0..h {
                let i = sigmoid(tr.z[GATE_INPUT * h + k]);
                let f = sigmoid(tr.z[GATE_FORGET * h + k]);
                let o = sigmoid(tr.z[GATE_OUTPUT * h + k]);
                let g = tr.z[GATE_CANDIDATE * h + k].tanh();
                let c = f * c_prev[k] + i * g;
                let at = t * GATES * h;
                tr.gates[at + GATE_INPUT * h + k] = i;
                tr.gates[at + GATE_FORGET * h + k] = f;
                tr.gates[at + GATE_OUTPUT * h + k] = o;
                tr.gates[at + GATE_CANDIDATE * h + k] = g;
                tr.c_next[t * h + k] = c;
            }
            for k in 0..h {
                let c = tr.c_next[t * h + k];
                let tc = c.tanh();
                tr.c[t * h + k] = c;
                tr.tc[t * h + k] = tc;
                tr.h[t * h + k] = tr.gates[t * GATES * h + GATE_OUTPUT * h + k] * tc;
            }
        }
        let h_last = &tr.h[(t_len - 1) * h..t_len * h];
        match &self.attention {
            None => self.head_bias + dot(&self.head, h_last),
            Some(att) => {
                let a = att.size;
                for t in 0..t_len {
                    let ht = &tr.h[t * h..(t + 1) * h];
                    tr.scores[t] = attention_score(att, ht, Some(&mut tr.u[t * a..(t + 1) * a]));
                }
                if softmax_into(&tr.scores, &mut tr.alpha).is_err() {
                    // Only reachable with non-finite weights; poison the output.
                    tr.alpha.fill(f64::NAN);
                }
                tr.ctx.iter_mut().for_each(|c| *c = 0.0);
                for t in 0..t_len {
                    axpy(tr.alpha[t], &tr.h[t * h..(t + 1) * h], &mut tr.ctx);
                }
                self.head_bias + dot(&self.head[..h], &tr.ctx) + dot(&self.head[h..], h_last)
            }
        }
    }

    /// Accumulate `dy · ∂ŷ/∂θ` into `grad`.
    fn backward(&self, xs: &[Vec<f64>], tr: &mut Trace, dy: f64, grad: &mut Network) {
        let h = self.hidden_size();
        let d = self.lstm.input_size;
        let t_len = xs.len();
        tr.dh.iter_mut().for_each(|v| *v = 0.0);
        let last = (t_len - 1) * h;
        grad.head_bias += dy;
        match &self.attention {
            None => {
                axpy(dy, &tr.h[last..last + h], &mut grad.head);
                axpy(dy, &self.head, &mut tr.dh[last..last + h]);
            }
            Some(att) => {
                let ga = grad.attention.as_mut().expect("gradient mirrors network");
                let a = att.size;
                axpy(dy, &tr.ctx, &mut grad.head[..h]);
                axpy(dy, &tr.h[last..last + h], &mut grad.head[h..]);
                axpy(dy, &self.head[h..], &mut tr.dh[last..last + h]);
                // dc = dy·g_c ; dα_t = dc·h_t ; dh_t += α_t dc
                let dc: Vec<f64> = self.head[..h].iter().map(|w| dy * w).collect();
                for t in 0..t_len {
                    tr.dalpha[t] = dot(&dc, &tr.h[t * h..(t + 1) * h]);
                    axpy(tr.alpha[t], &dc, &mut tr.dh[t * h..(t + 1) * h]);
                }
                let weighted: f64 = tr.alpha.iter().zip(&tr.dalpha).map(|(a, g)| a * g).sum();
                for t in 0..t_len {
                    let de = tr.alpha[t] * (tr.dalpha[t] - weighted);
                    if de == 0.0 {
                        continue;
                    }
                    let ht = &tr.h[t * h..(t + 1) * h];
                    for j in 0..a {
                        let u = tr.u[t * a + j];
                        ga.v[j] += de * u;
                        let dpre = de * att.v[j] * (1.0 - u * u);
                        ga.b[j] += dpre;
                        axpy(dpre, ht, &mut ga.w_h[j * h..(j + 1) * h]);
                        axpy(dpre, &att.w_h[j * h..(j + 1) * h], &mut tr.dh[t * h..(t + 1) * h]);
                    }
                }
            }
        }

        // Backpropagation through time.
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut dz = vec![0.0; GATES * h];
        for t in (0..t_len).rev() {
            let g = &tr.gates[t * GATES * h..(t + 1) * GATES * h];
            for k in 0..h {
                let dh = tr.dh[t * h + k] + dh_next[k];
                let i = g[GATE_INPUT * h + k];
                let f = g[GATE_FORGET * h + k];
                let o = g[GATE_OUTPUT * h + k];
                let cand = g[GATE_CANDIDATE * h + k];
                let tc = tr.tc[t * h + k];
                let c_prev = if t == 0 { 0.0 } else { tr.c[(t - 1) * h + k] };
                let dc = dc_next[k] + dh * o * (1.0 - tc * tc);
                dz[GATE_INPUT * h + k] = dc * cand * i * (1.0 - i);
                dz[GATE_FORGET * h + k] = dc * c_prev * f * (1.0 - f);
                dz[GATE_OUTPUT * h + k] = dh * tc * o * (1.0 - o);
                dz[GATE_CANDIDATE * h + k] = dc * i * (1.0 - cand * cand);
                dc_next[k] = dc * f;
            }
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            for r in 0..GATES * h {
                let dzr = dz[r];
                if dzr == 0.0 {
                    continue;
                }
                grad.lstm.bias[r] += dzr;
                axpy(dzr, &xs[t], &mut grad.lstm.w_x[r * d..(r + 1) * d]);
                if t > 0 {
                    axpy(dzr, &tr.h[(t - 1) * h..t * h], &mut grad.lstm.w_h[r * h..(r + 1) * h]);
                }
                axpy(dzr, &self.lstm.w_h[r * h..(r + 1) * h], &mut dh_next);
            }
        }
    }

    /// Mean squared error over `(window, target)` pairs and its gradient.
    pub fn loss_and_gradient(&self, batch: &[(&[Vec<f64>], f64)]) -> (f64, Network) {
        let mut grad = self.zeroed_like();
        let mut trace = Trace::new(self, WINDOW);
        let loss = self.accumulate(batch, &mut trace, &mut grad);
        (loss, grad)
    }

    fn accumulate(&self, batch: &[(&[Vec<f64>], f64)], trace: &mut Trace, grad: &mut Network) -> f64 {
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for (xs, y) in batch {
            let pred = self.forward(xs, trace);
            let r = pred - y;
            loss += r * r * scale;
            self.backward(xs, trace, 2.0 * r * scale, grad);
        }
        loss
    }

    fn zeroed_like(&self) -> Network {
        Network::zeros(
            self.lstm.input_size,
            self.hidden_size(),
            self.attention.as_ref().map(|a| a.size),
        )
    }
}

/// Forward activations kept for the backward pass.
struct Trace {
    z: Vec<f64>,
    gates: Vec<f64>,
    c_next: Vec<f64>,
    c: Vec<f64>,
    tc: Vec<f64>,
    h: Vec<f64>,
    dh: Vec<f64>,
    u: Vec<f64>,
    scores: Vec<f64>,
    alpha: Vec<f64>,
    dalpha: Vec<f64>,
    ctx: Vec<f64>,
}

impl Trace {
    fn new(net: &Network, t_len: usize) -> Self {
        let mut tr = Trace {
            z: Vec::new(),
            gates: Vec::new(),
            c_next: Vec::new(),
            c: Vec::new(),
            tc: Vec::new(),
            h: Vec::new(),
            dh: Vec::new(),
            u: Vec::new(),
            scores: Vec::new(),
            alpha: Vec::new(),
            dalpha: Vec::new(),
            ctx: Vec::new(),
        };
        tr.resize(net, t_len);
        tr
    }

    fn resize(&mut self, net: &Network, t_len: usize) {
        let h = net.hidden_size();
        let a = net.attention.as_ref().map_or(0, |a| a.size);
        self.z.resize(GATES * h, 0.0);
        self.gates.resize(t_len * GATES * h, 0.0);
        for v in [&mut self.c_next, &mut self.c, &mut self.tc, &mut self.h, &mut self.dh] {
            v.resize(t_len * h, 0.0);
        }
        self.u.resize(t_len * a, 0.0);
        for v in [&mut self.scores, &mut self.alpha, &mut self.dalpha] {
            v.resize(t_len, 0.0);
        }
        self.ctx.resize(h, 0.0);
    }
}

/// Input rows `inputs` feed the prediction for row `target`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceWindow {
    pub inputs: Range<usize>,
    pub target: usize,
}

/// One window per target index `t` in `[window, n)`.
pub fn make_windows(n_rows: usize, window: usize) -> Result<Vec<SequenceWindow>> {
    if window == 0 || n_rows < window + 1 {
        return Err(Error::data(format!(
            "need at least {} rows for a {window}-step window, got {n_rows}",
            window + 1
        )));
    }
    Ok((window..n_rows)
        .map(|t| SequenceWindow {
            inputs: t - window..t,
            target: t,
        })
        .collect())
}

/// Adaptive-moment optimiser state.
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Adam {
    fn new(n: usize) -> Self {
        Adam { m: vec![0.0; n], v: vec![0.0; n], step: 0 }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.step += 1;
        let c1 = 1.0 - BETA1.powi(self.step);
        let c2 = 1.0 - BETA2.powi(self.step);
        for k in 0..params.len() {
            self.m[k] = BETA1 * self.m[k] + (1.0 - BETA1) * grad[k];
            self.v[k] = BETA2 * self.v[k] + (1.0 - BETA2) * grad[k] * grad[k];
            params[k] -= lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + ADAM_EPS);
        }
    }
}

#[derive(Debug, Clone)]
pub struct SequenceFit {
    pub network: Network,
    /// Mean training loss of each epoch.
    pub loss_history: Vec<f64>,
}

/// Train on row-major features `rows` and targets `y` (same length).
pub fn fit_sequence(
    rows: &[Vec<f64>],
    y: &[f64],
    cfg: &SequenceConfig,
    attention: bool,
    rng: &mut Rng,
) -> Result<SequenceFit> {
    cfg.validate()?;
    let windows = make_windows(rows.len(), WINDOW)?;
    let d = rows[0].len();
    let mut net = Network::init(d, cfg.hidden, attention.then_some(cfg.attention_size), rng);
    let mut adam = Adam::new(net.n_params());
    let mut grad = net.zeroed_like();
    let mut trace = Trace::new(&net, WINDOW);
    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut params = net.to_flat();
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    let mut batch: Vec<(&[Vec<f64>], f64)> = Vec::with_capacity(cfg.batch_size);

    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&k| {
                let w = &windows[k];
                (&rows[w.inputs.clone()], y[w.target])
            }));
            grad.set_flat(&vec![0.0; params.len()]);
            let loss = net.accumulate(&batch, &mut trace, &mut grad);
            epoch_loss += loss * chunk.len() as f64;
            let mut g = grad.to_flat();
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > cfg.clip {
                let s = cfg.clip / norm;
                g.iter_mut().for_each(|v| *v *= s);
            }
            adam.update(&mut params, &g, cfg.learning_rate);
            net.set_flat(&params);
            if !net.is_finite() {
                return Err(Error::numeric(format!("non-finite weights during epoch {}", epoch + 1)));
            }
        }
        let mean_loss = epoch_loss / windows.len() as f64;
        log::debug!("epoch {}: loss {mean_loss:.6}", epoch + 1);
        loss_history.push(mean_loss);
    }
    Ok(SequenceFit { network: net, loss_history })
}

/// Predictions for every row of `rows`; the first `WINDOW` rows get none.
pub fn predict_sequence(net: &Network, rows: &[Vec<f64>]) -> Vec<Option<f64>> {
    let mut out = vec![None; rows.len()];
    if rows.len() <= WINDOW {
        return out;
    }
    let mut trace = Trace::new(net, WINDOW);
    for t in WINDOW..rows.len() {
        out[t] = Some(net.forward(&rows[t - WINDOW..t], &mut trace));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::finite_difference_gradient;

    fn random_batch(rng: &mut Rng, n: usize, t: usize, d: usize) -> Vec<(Vec<Vec<f64>>, f64)> {
        (0..n)
            .map(|_| {
                let xs = (0..t).map(|_| (0..d).map(|_| rng.normal()).collect()).collect();
                (xs, rng.normal())
            })
            .collect()
    }

    fn max_rel_error(net: &Network, data: &[(Vec<Vec<f64>>, f64)]) -> f64 {
        let batch: Vec<(&[Vec<f64>], f64)> = data.iter().map(|(x, y)| (x.as_slice(), *y)).collect();
        let (_, grad) = net.loss_and_gradient(&batch);
        let analytic = grad.to_flat();
        let mut probe = net.clone();
        let numeric = finite_difference_gradient(
            |p| {
                probe.set_flat(p);
                probe.loss_and_gradient(&batch).0
            },
            &net.to_flat(),
            1e-5,
        )
        .unwrap();
        analytic
            .iter()
            .zip(&numeric)
            .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
            .fold(0.0, f64::max)
    }

    #[test]
    fn zero_weights_give_zero_state() {
        let w = LstmWeights::zeros(3, 4);
        let (h, c) = lstm_cell_forward(&[1.0, -2.0, 0.5], &[0.0; 4], &[0.0; 4], &w).unwrap();
        assert!(h.iter().chain(&c).all(|v| *v == 0.0));
    }

    #[test]
    fn saturated_forget_gate_keeps_memory() {
        let mut w = LstmWeights::zeros(2, 3);
        w.gate_bias_mut(GATE_FORGET).fill(20.0);
        w.gate_bias_mut(GATE_INPUT).fill(-20.0);
        let c_prev = [0.7, -1.3, 2.0];
        let (_, c) = lstm_cell_forward(&[0.3, 0.9], &[0.1, 0.2, 0.3], &c_prev, &w).unwrap();
        for (a, b) in c.iter().zip(&c_prev) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn cell_rejects_shape_mismatch() {
        let w = LstmWeights::zeros(2, 3);
        assert!(lstm_cell_forward(&[1.0], &[0.0; 3], &[0.0; 3], &w).is_err());
    }

    #[test]
    fn attention_on_identical_states_returns_that_state() {
        let mut rng = Rng::new(1);
        let net = Network::init(1, 3, Some(4), &mut rng);
        let h = vec![vec![0.3, -0.2, 0.9]; 5];
        let (c, alpha) = attention_forward(&h, net.attention.as_ref().unwrap()).unwrap();
        for (a, b) in c.iter().zip(&h[0]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((alpha.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn attention_single_step_and_hand_softmax() {
        let w = AttentionWeights::zeros(1, 1);
        let (c, a) = attention_forward(&[vec![2.5]], &w).unwrap();
        assert_eq!((c, a), (vec![2.5], vec![1.0]));

        // u_t = tanh(h_t) with W_h = 1, b = 0; pick h so that v·u = [1, 2].
        let v = 4.0;
        let h1 = (1.0f64 / v).atanh();
        let h2 = (2.0f64 / v).atanh();
        let w = AttentionWeights { size: 1, hidden_size: 1, w_h: vec![1.0], b: vec![0.0], v: vec![v] };
        let (c, a) = attention_forward(&[vec![h1], vec![h2]], &w).unwrap();
        assert!((a[0] - 0.268_941_421_369_995).abs() < 1e-12);
        assert!((a[1] - 0.731_058_578_630_005).abs() < 1e-12);
        assert!((c[0] - (a[0] * h1 + a[1] * h2)).abs() < 1e-15);
        assert!(attention_forward(&[], &w).is_err());
    }

    #[test]
    fn uniform_scores_average_hidden_states() {
        let w = AttentionWeights { v: vec![0.0; 2], ..AttentionWeights::zeros(2, 2) };
        let hs = vec![vec![1.0, 0.0], vec![3.0, 2.0], vec![2.0, 4.0]];
        let (c, _) = attention_forward(&hs, &w).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-15 && (c[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn lstm_gradient_matches_finite_differences() {
        let mut rng = Rng::new(11);
        let net = Network::init(3, 4, None, &mut rng);
        let data = random_batch(&mut rng, 3, 5, 3);
        let err = max_rel_error(&net, &data);
        assert!(err < 1e-5, "max relative error {err}");
    }

    #[test]
    fn attention_gradient_matches_finite_differences() {
        let mut rng = Rng::new(12);
        let net = Network::init(2, 5, Some(3), &mut rng);
        let data = random_batch(&mut rng, 2, 6, 2);
        let err = max_rel_error(&net, &data);
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn window_counts() {
        assert_eq!(make_windows(25, 24).unwrap().len(), 1);
        assert_eq!(make_windows(30, 24).unwrap().len(), 6);
        let w = make_windows(3, 1).unwrap();
        assert_eq!(w.len(), 2);
        assert!(w.iter().all(|w| w.inputs.len() == 1));
        assert_eq!(w[0], SequenceWindow { inputs: 0..1, target: 1 });
        assert!(make_windows(24, 24).is_err());
    }

    #[test]
    fn fit_is_deterministic_and_reduces_loss() {
        let mut rng = Rng::new(4);
        let n = 120;
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![(i as f64 * 0.3).sin(), rng.uniform()]).collect();
        let y: Vec<f64> = (0..n).map(|i| 0.5 + 0.4 * (i as f64 * 0.3).sin()).collect();
        let cfg = SequenceConfig { hidden: 4, epochs: 5, batch_size: 8, attention_size: 3, ..Default::default() };
        for attention in [false, true] {
            let a = fit_sequence(&rows, &y, &cfg, attention, &mut Rng::new(9)).unwrap();
            let b = fit_sequence(&rows, &y, &cfg, attention, &mut Rng::new(9)).unwrap();
            assert_eq!(a.network, b.network);
            assert!(a.loss_history.last().unwrap() <= &a.loss_history[0]);
            let p = predict_sequence(&a.network, &rows[..30]);
            assert_eq!(p.iter().filter(|v| v.is_some()).count(), 6);
            assert!(p[..24].iter().all(Option::is_none));
        }
    }

    #[test]
    fn too_few_rows_rejected() {
        let rows = vec![vec![0.0]; 24];
        assert!(fit_sequence(&rows, &[0.0; 24], &SequenceConfig::default(), false, &mut Rng::new(0)).is_err());
    }
}
