//! Small numerical helpers shared across modules: compensated sums, the
//! Riemann zeta tail and order statistics.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = CompensatedSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// `sum_i a_i b_i` with compensation. Every inner product in the crate goes
/// through here so that identical inputs give bit-identical results.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    compensated_sum(a.iter().zip(b).map(|(x, y)| x * y))
}

/// `sum_{m >= start} m^{-q}` for `q > 1`, `start >= 1`.
///
/// Direct summation up to `m = 63`, then Euler-Maclaurin with three
/// Bernoulli corrections; absolute error is far below 1e-15 for `q >= 2`.
pub fn zeta_tail(q: f64, start: u64) -> f64 {
    assert!(q > 1.0, "zeta_tail needs q > 1");
    let start = start.max(1);
    let cut = start.max(64);
    let mut acc = CompensatedSum::new();
    // Add small terms first.
    for m in (start..cut).rev() {
        acc.add((m as f64).powf(-q));
    }
    let a = cut as f64;
    let fa = a.powf(-q);
    let mut tail = a * fa / (q - 1.0) + 0.5 * fa;
    tail += q * fa / a / 12.0;
    tail -= q * (q + 1.0) * (q + 2.0) * fa / a.powi(3) / 720.0;
    tail += q * (q + 1.0) * (q + 2.0) * (q + 3.0) * (q + 4.0) * fa / a.powi(5) / 30240.0;
    acc.add(tail);
    acc.value()
}

pub fn zeta(q: f64) -> f64 {
    zeta_tail(q, 1)
}

/// Lower median: the order statistic of rank `ceil(n/2)`. `values` is
/// reordered in place. Returns `None` for an empty slice.
pub fn lower_median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let k = (values.len() - 1) / 2;
    let (_, m, _) = values.select_nth_unstable_by(k, |a, b| a.total_cmp(b));
    Some(*m)
}

/// Index of the smallest entry, lowest index on ties.
pub fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derives a child seed from a base seed and a path of labels, by folding
/// each label through SplitMix64. Distinct paths give unrelated seeds.
pub fn split_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix64(base), |acc, &p| mix64(acc ^ mix64(p)))
}

/// Stable 64-bit label for a string (FNV-1a), for use in [`split_seed`].
pub fn label(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zeta_matches_closed_forms() {
        assert!((zeta(2.0) - PI.powi(2) / 6.0).abs() < 1e-14);
        assert!((zeta(4.0) - PI.powi(4) / 90.0).abs() < 1e-14);
        assert!((zeta(6.0) - PI.powi(6) / 945.0).abs() < 1e-14);
        assert!((zeta(10.0) - PI.powi(10) / 93555.0).abs() < 1e-14);
    }

    #[test]
    fn zeta_tail_is_zeta_minus_head() {
        let head: f64 = (1..=5).map(|m| (m as f64).powi(-2)).sum();
        assert!((zeta_tail(2.0, 6) - (zeta(2.0) - head)).abs() < 1e-14);
        // Large start goes straight to the asymptotic branch.
        let brute: f64 = (1000..2_000_000u64).map(|m| (m as f64).powi(-4)).sum();
        let rest = zeta_tail(4.0, 2_000_000);
        assert!((zeta_tail(4.0, 1000) - (brute + rest)).abs() < 1e-18);
    }

    #[test]
    fn lower_median_even_and_odd() {
        assert_eq!(lower_median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(lower_median(&mut [4.0, 1.0, 3.0, 2.0]), Some(2.0));
        assert_eq!(lower_median(&mut []), None);
    }

    #[test]
    fn ties_pick_lowest_index() {
        assert_eq!(argmin(&[1.0, 0.0, 0.0]), 1);
        assert_eq!(argmax(&[2.0, 5.0, 5.0]), 1);
    }

    #[test]
    fn split_seed_separates_paths() {
        let a = split_seed(7, &[1, 2]);
        assert_eq!(a, split_seed(7, &[1, 2]));
        assert_ne!(a, split_seed(7, &[2, 1]));
        assert_ne!(a, split_seed(8, &[1, 2]));
        assert_ne!(split_seed(7, &[0]), split_seed(7, &[]));
        assert_ne!(label("pool"), label("support"));
    }

    #[test]
    fn compensation_recovers_small_terms() {
        let v = [1.0, 1e-16, 1e-16, -1.0];
        assert!((compensated_sum(v) - 2e-16).abs() < 1e-30);
    }
}
