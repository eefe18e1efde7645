use serde::{Deserialize, Serialize};

/// Split point between two adjacent distinct values: their midpoint, or
/// `lo` when the midpoint rounds up to `hi` (neighbouring floats), so that
/// `x <= split` always separates the two.
#[inline]
pub fn split_point(lo: f64, hi: f64) -> f64 {
    let mid = 0.5 * (lo + hi);
    if mid < hi {
        mid
    } else {
        lo
    }
}

/// Equal-frequency bin edges for one feature.
///
/// Bin `k` holds values in `(thresholds[k-1], thresholds[k]]`; the last bin
/// is open above. When a feature has no more distinct values than bins,
/// every distinct value gets a bin of its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinMapper {
    pub thresholds: Vec<f64>,
}

impl BinMapper {
    pub fn fit(values: &[f64], max_bins: usize) -> Self {
        let mut sorted: Vec<f64> = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut distinct: Vec<(f64, usize)> = Vec::new();
        for v in sorted {
            match distinct.last_mut() {
                Some((last, count)) if *last == v => *count += 1,
                _ => distinct.push((v, 1)),
            }
        }
        let mut thresholds = Vec::new();
        if distinct.len() <= max_bins {
            for w in distinct.windows(2) {
                thresholds.push(split_point(w[0].0, w[1].0));
            }
        } else {
            let n = values.len() as f64;
            let per_bin = n / max_bins as f64;
            let mut seen = 0usize;
            for (k, w) in distinct.windows(2).enumerate() {
                seen += w[0].1;
                let remaining_values = distinct.len() - k - 1;
                let closed = thresholds.len() + 1;
                let remaining_bins = max_bins - closed;
                if seen as f64 >= closed as f64 * per_bin || remaining_values <= remaining_bins {
                    thresholds.push(split_point(w[0].0, w[1].0));
                    if thresholds.len() + 1 == max_bins {
                        break;
                    }
                }
            }
        }
        BinMapper { thresholds }
    }

    pub fn n_bins(&self) -> usize {
        self.thresholds.len() + 1
    }

    #[inline]
    pub fn bin(&self, x: f64) -> usize {
        self.thresholds.partition_point(|t| *t < x)
    }
}

/// Column-major matrix of bin indices.
#[derive(Debug, Clone)]
pub struct BinnedMatrix {
    pub mappers: Vec<BinMapper>,
    pub bins: Vec<Vec<u16>>,
}

impl BinnedMatrix {
    pub fn fit(columns: &[Vec<f64>], max_bins: usize) -> Self {
        let max_bins = max_bins.clamp(2, usize::from(u16::MAX));
        let mappers: Vec<BinMapper> = columns.iter().map(|c| BinMapper::fit(c, max_bins)).collect();
        let bins = columns
            .iter()
            .zip(&mappers)
            .map(|(c, m)| c.iter().map(|x| m.bin(*x) as u16).collect())
            .collect();
        BinnedMatrix { mappers, bins }
    }

    pub fn n_rows(&self) -> usize {
        self.bins.first().map_or(0, Vec::len)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_point_separates_neighbouring_floats() {
        for lo in [0.1f64, 0.3, 1.0 / 3.0, 0.7, 123.456, -2.5] {
            let hi = f64::from_bits(lo.to_bits() + 1);
            let hi = if lo < 0.0 { f64::from_bits(lo.to_bits() - 1) } else { hi };
            let s = split_point(lo, hi);
            assert!(lo <= s && s < hi, "{lo} {hi} {s}");
        }
        assert_eq!(split_point(1.0, 2.0), 1.5);
    }

    #[test]
    fn one_bin_per_distinct_value_when_room() {
        let m = BinMapper::fit(&[3.0, 1.0, 2.0, 2.0, 0.0], 255);
        assert_eq!(m.thresholds, vec![0.5, 1.5, 2.5]);
        assert_eq!(m.bin(0.0), 0);
        assert_eq!(m.bin(1.5), 1);
        assert_eq!(m.bin(1.6), 2);
        assert_eq!(m.bin(99.0), 3);
    }

    #[test]
    fn equal_frequency_when_crowded() {
        let values: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let m = BinMapper::fit(&values, 10);
        assert_eq!(m.n_bins(), 10);
        let mut counts = vec![0; 10];
        for v in &values {
            counts[m.bin(*v)] += 1;
        }
        assert!(counts.iter().all(|c| (90..=110).contains(c)), "{counts:?}");
    }

    #[test]
    fn never_exceeds_max_bins_with_heavy_ties() {
        let mut values = vec![0.0; 500];
        values.extend((0..500).map(|i| i as f64 * 0.1));
        let m = BinMapper::fit(&values, 16);
        assert!(m.n_bins() <= 16);
        assert!(m.thresholds.windows(2).all(|w| w[0] < w[1]));
    }
}
