//! Small deterministic numeric kernel shared by the pipeline and the models.

use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};

/// Seeded random generator.
///
/// Children created with [`Rng::derive`] depend only on the seed and the
/// label, never on how many values have already been drawn from the parent.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha12Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child generator keyed by `label`.
    pub fn derive(&self, label: &str) -> Rng {
        Rng::new(derive_seed(self.seed, label))
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal draw (Box-Muller, one value per call).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }

    /// Random permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        self.shuffle(&mut p);
        p
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for a labelled child stream: FNV-1a over the label, mixed with the
/// parent seed through splitmix64.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    splitmix64(splitmix64(seed) ^ h)
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(scores: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; scores.len()];
    softmax_into(scores, &mut out)?;
    Ok(out)
}

pub(crate) fn softmax_into(scores: &[f64], out: &mut [f64]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::numeric("softmax of an empty vector"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::numeric("softmax input contains a non-finite score"));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, s) in out.iter_mut().zip(scores) {
        *o = (s - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
    Ok(())
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Pearson correlation. Returns 0 when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::numeric(format!(
            "pearson: length mismatch ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::numeric("pearson: need at least two observations"));
    }
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Central-difference gradient of `f` at `x`.
pub fn finite_difference_gradient<F>(mut f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(h > 0.0) {
        return Err(Error::numeric("finite difference step must be positive"));
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::numeric(format!(
                "non-finite function value probing coordinate {i}"
            )));
        }
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    // Both globs above export these names; pick ours explicitly.
    use super::Rng;
    use rand::RngCore;

    #[test]
    fn softmax_examples() {
        let u = softmax(&[0.0, 0.0, 0.0]).unwrap();
        for p in &u {
            assert_abs_diff_eq!(*p, 1.0 / 3.0, epsilon = 1e-15);
        }
        let s = softmax(&[1000.0, 0.0]).unwrap();
        assert!(s.iter().all(|p| p.is_finite()));
        assert_abs_diff_eq!(s[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s[1], 0.0, epsilon = 1e-12);
        let t = softmax(&[1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(t[0], 0.26894, epsilon = 1e-5);
        assert_abs_diff_eq!(t[1], 0.73106, epsilon = 1e-5);
    }

    #[test]
    fn softmax_rejects_bad_input() {
        assert!(softmax(&[]).is_err());
        assert!(softmax(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn pearson_examples() {
        assert_abs_diff_eq!(pearson(&[1., 2., 3.], &[1., 2., 3.]).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pearson(&[1., 2., 3.], &[3., 2., 1.]).unwrap(), -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            pearson(&[1., 2., 3., 4.], &[1., 2., 3., 5.]).unwrap(),
            0.98270,
            epsilon = 1e-4
        );
        assert_eq!(pearson(&[1., 1., 1.], &[1., 2., 3.]).unwrap(), 0.0);
        assert!(pearson(&[1.], &[1.]).is_err());
        assert!(pearson(&[1., 2.], &[1.]).is_err());
    }

    #[test]
    fn finite_difference_examples() {
        let g = finite_difference_gradient(|x| x[0] * x[0], &[3.0], 1e-5).unwrap();
        assert_abs_diff_eq!(g[0], 6.0, epsilon = 1e-6);
        let g = finite_difference_gradient(|_| 4.2, &[1.0, -2.0], 1e-5).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
        let g = finite_difference_gradient(|x| x[0] * x[1], &[2.0, 5.0], 1e-5).unwrap();
        assert_abs_diff_eq!(g[0], 5.0, epsilon = 1e-6);
        assert_abs_diff_eq!(g[1], 2.0, epsilon = 1e-6);
        assert!(finite_difference_gradient(|x| x[0].ln(), &[0.0], 1e-5).is_err());
        assert!(finite_difference_gradient(|x| x[0], &[0.0], 0.0).is_err());
    }

    #[test]
    fn rng_same_seed_same_stream() {
        let mut a = Rng::new(99);
        let mut b = Rng::new(99);
        for _ in 0..10_000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn derived_children_ignore_parent_draws() {
        let parent = Rng::new(7);
        let mut drained = Rng::new(7);
        for _ in 0..123 {
            drained.next_u64();
        }
        let mut c1 = parent.derive("gbrt/price");
        let mut c2 = drained.derive("gbrt/price");
        let mut other = parent.derive("gbrt/demand");
        let x = c1.next_u64();
        assert_eq!(x, c2.next_u64());
        assert_ne!(x, other.next_u64());
    }

    #[test]
    fn softmax_sums_to_one_on_random_inputs() {
        let mut rng = Rng::new(1);
        for _ in 0..1000 {
            let n = 1 + rng.index(20);
            let scale = 10f64.powf(rng.uniform_range(-2.0, 3.0));
            let v: Vec<f64> = (0..n).map(|_| rng.normal() * scale).collect();
            let s = softmax(&v).unwrap();
            assert!((s.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            assert!(s.iter().all(|p| *p >= 0.0));
        }
    }

    proptest! {
        #[test]
        fn softmax_shift_invariant(v in prop::collection::vec(-50.0f64..50.0, 1..12), c in -100.0f64..100.0) {
            let a = softmax(&v).unwrap();
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let b = softmax(&shifted).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }

        #[test]
        fn softmax_preserves_argmax(v in prop::collection::vec(-50.0f64..50.0, 1..12)) {
            let s = softmax(&v).unwrap();
            let am = |xs: &[f64]| xs.iter().enumerate().fold(0, |b, (i, x)| if *x > xs[b] { i } else { b });
            prop_assert_eq!(am(&v), am(&s));
        }

        #[test]
        fn pearson_bounded_and_affine(x in prop::collection::vec(-100.0f64..100.0, 2..40),
                                      y in prop::collection::vec(-100.0f64..100.0, 2..40),
                                      a in prop_oneof![-10.0f64..-0.1, 0.1f64..10.0],
                                      b in -50.0f64..50.0) {
            let n = x.len().min(y.len());
            let r = pearson(&x[..n], &y[..n]).unwrap();
            prop_assert!(r.abs() <= 1.0);
            prop_assume!(std_dev(&x) > 1e-3);
            let ax: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let r = pearson(&x, &ax).unwrap();
            prop_assert!((r - a.signum()).abs() <= 1e-10);
        }
    }
}
