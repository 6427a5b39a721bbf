//! Kernel families used by the benchmarks.
//!
//! * Periodic Sobolev on the torus `[0,1)^p`, a coordinate-wise product of
//!   the 1-D factor
//!
//!   ```text
//!   k_s(x, y) = 1 + (-1)^(s-1) (2 pi)^(2s) / (2s)! * B_2s(|x - y|)
//!             = 1 + 2 sum_{m >= 1} cos(2 pi m t) / m^(2s)
//!   ```
//!
//!   evaluated from the Bernoulli polynomial for `s <= 3` and from the
//!   truncated cosine series for `s > 3`.
//! * Gaussian RBF `exp(-|x - y|^2 / (2 l^2))` on `R^p`.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::matrix::SquareMatrix;
use crate::numeric::{lower_median, zeta, zeta_tail};
use crate::points::PointSet;

pub const DEFAULT_FOURIER_TOLERANCE: f64 = 1e-12;

/// Pair cap for the median heuristic before it switches to subsampling.
pub const DEFAULT_MEDIAN_MAX_PAIRS: usize = 500_000;

/// Largest smoothness evaluated from the Bernoulli closed form.
pub const MAX_CLOSED_FORM_SMOOTHNESS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelFamily {
    PeriodicSobolev { smoothness: u32 },
    Rbf { lengthscale: f64 },
}

/// A positive-definite kernel with its input dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    dim: usize,
    fourier_tolerance: f64,
    /// `m^(-2s)` for `m = 1..=M`; empty on the closed-form path.
    fourier_coeffs: Vec<f64>,
}

impl KernelSpec {
    pub fn periodic_sobolev(dim: usize, smoothness: u32) -> Result<Self> {
        Self::periodic_sobolev_with_tolerance(dim, smoothness, DEFAULT_FOURIER_TOLERANCE)
    }

    pub fn periodic_sobolev_with_tolerance(
        dim: usize,
        smoothness: u32,
        fourier_tolerance: f64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("kernel dimension must be at least 1"));
        }
        if smoothness == 0 {
            return Err(invalid("Sobolev smoothness must be at least 1"));
        }
        if !(fourier_tolerance > 0.0 && fourier_tolerance.is_finite()) {
            return Err(invalid("Fourier tolerance must be positive and finite"));
        }
        let fourier_coeffs = if smoothness > MAX_CLOSED_FORM_SMOOTHNESS {
            fourier_coefficients(smoothness, fourier_truncation(smoothness, fourier_tolerance))
        } else {
            Vec::new()
        };
        Ok(Self {
            family: KernelFamily::PeriodicSobolev { smoothness },
            dim,
            fourier_tolerance,
            fourier_coeffs,
        })
    }

    pub fn rbf(dim: usize, lengthscale: f64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("kernel dimension must be at least 1"));
        }
        if !(lengthscale > 0.0 && lengthscale.is_finite()) {
            return Err(invalid(format!("RBF lengthscale must be positive, got {lengthscale}")));
        }
        Ok(Self {
            family: KernelFamily::Rbf { lengthscale },
            dim,
            fourier_tolerance: DEFAULT_FOURIER_TOLERANCE,
            fourier_coeffs: Vec::new(),
        })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fourier_tolerance(&self) -> f64 {
        self.fourier_tolerance
    }

    /// Number of cosine terms kept on the Fourier path (0 for closed form).
    pub fn fourier_terms(&self) -> usize {
        self.fourier_coeffs.len()
    }

    /// `k(x, y)`; both points must have `dim` finite coordinates.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        self.check_point(y)?;
        Ok(self.eval_unchecked(x, y))
    }

    pub(crate) fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(invalid(format!(
                "point has dimension {}, kernel expects {}",
                x.len(),
                self.dim
            )));
        }
        if x.iter().any(|c| !c.is_finite()) {
            return Err(invalid("non-finite point coordinate"));
        }
        Ok(())
    }

    pub(crate) fn check_points(&self, points: &PointSet) -> Result<()> {
        if points.dim() != self.dim {
            return Err(invalid(format!(
                "points have dimension {}, kernel expects {}",
                points.dim(),
                self.dim
            )));
        }
        if points.coords().iter().any(|c| !c.is_finite()) {
            return Err(invalid("non-finite point coordinate"));
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.family {
            KernelFamily::PeriodicSobolev { smoothness } => {
                let mut prod = 1.0;
                for (&a, &b) in x.iter().zip(y) {
                    let t = (a.rem_euclid(1.0) - b.rem_euclid(1.0)).abs();
                    prod *= if self.fourier_coeffs.is_empty() {
                        sobolev_factor_closed_form(smoothness, t)
                    } else {
                        sobolev_factor_series(&self.fourier_coeffs, t)
                    };
                }
                prod
            }
            KernelFamily::Rbf { lengthscale } => {
                let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-sq / (2.0 * lengthscale * lengthscale)).exp()
            }
        }
    }

    /// `kappa = sup_x sqrt(k(x, x))`.
    pub fn diagonal_bound(&self) -> f64 {
        match self.family {
            KernelFamily::PeriodicSobolev { smoothness } => {
                (1.0 + 2.0 * zeta(2.0 * smoothness as f64)).powf(self.dim as f64 / 2.0)
            }
            KernelFamily::Rbf { .. } => 1.0,
        }
    }

    pub fn spectral_profile(&self) -> Result<SpectralProfile> {
        match self.family {
            KernelFamily::PeriodicSobolev { smoothness } => {
                Ok(SpectralProfile { dim: self.dim, smoothness })
            }
            KernelFamily::Rbf { .. } => {
                Err(Error::Unsupported("spectral profile is only available for periodic Sobolev".into()))
            }
        }
    }
}

/// Closed-form 1-D Sobolev factor for `s <= 3`, `t in [0, 1]`.
pub fn sobolev_factor_closed_form(smoothness: u32, t: f64) -> f64 {
    let t2 = t * t;
    match smoothness {
        1 => 1.0 + 2.0 * PI * PI * (t2 - t + 1.0 / 6.0),
        2 => {
            let b4 = t2 * t2 - 2.0 * t2 * t + t2 - 1.0 / 30.0;
            1.0 - (2.0 * PI).powi(4) / 24.0 * b4
        }
        3 => {
            let t4 = t2 * t2;
            let b6 = t4 * t2 - 3.0 * t4 * t + 2.5 * t4 - 0.5 * t2 + 1.0 / 42.0;
            1.0 + (2.0 * PI).powi(6) / 720.0 * b6
        }
        _ => panic!("no closed form for smoothness {smoothness}"),
    }
}

/// Smallest `M` with `2 M^(1-2s) / (2s-1) <= tolerance`, an integral bound
/// on the dropped tail `2 sum_{m>M} m^(-2s)`.
pub fn fourier_truncation(smoothness: u32, tolerance: f64) -> usize {
    let q = 2.0 * smoothness as f64;
    let bound = |m: f64| 2.0 * m.powf(1.0 - q) / (q - 1.0);
    // Closed-form guess, then fix up floating error either way.
    let mut m = ((2.0 / ((q - 1.0) * tolerance)).powf(1.0 / (q - 1.0))).ceil().max(1.0);
    while m > 1.0 && bound(m - 1.0) <= tolerance {
        m -= 1.0;
    }
    while bound(m) > tolerance {
        m += 1.0;
    }
    m as usize
}

pub fn fourier_coefficients(smoothness: u32, terms: usize) -> Vec<f64> {
    let q = 2.0 * smoothness as f64;
    (1..=terms).map(|m| (m as f64).powf(-q)).collect()
}

/// `1 + 2 sum_m c_m cos(2 pi m t)`, cosines by the Chebyshev recurrence.
pub fn sobolev_factor_series(coeffs: &[f64], t: f64) -> f64 {
    let theta = 2.0 * PI * t;
    let c1 = theta.cos();
    let two_c1 = 2.0 * c1;
    let (mut prev, mut cur) = (1.0, c1);
    // Sum smallest terms first.
    let mut cosines = Vec::with_capacity(coeffs.len());
    for _ in coeffs {
        cosines.push(cur);
        let next = two_c1 * cur - prev;
        prev = cur;
        cur = next;
    }
    let mut acc = 0.0;
    for (c, cosv) in coeffs.iter().zip(&cosines).rev() {
        acc += c * cosv;
    }
    1.0 + 2.0 * acc
}

/// Symmetric Gram matrix `K_ij = k(x_i, x_j)`. Rows are computed in
/// parallel; each entry is the same call as a pairwise evaluation.
pub fn gram_matrix(spec: &KernelSpec, points: &PointSet) -> Result<SquareMatrix> {
    if points.is_empty() {
        return Err(invalid("Gram matrix needs at least one point"));
    }
    spec.check_points(points)?;
    let n = points.len();
    let mut data = vec![0.0; n * n];
    data.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let xi = points.point(i);
        for (j, entry) in row.iter_mut().enumerate() {
            *entry = spec.eval_unchecked(xi, points.point(j));
        }
    });
    Ok(SquareMatrix::from_row_major(n, data))
}

/// Median pairwise Euclidean distance (lower median). With more than
/// `max_pairs` pairs, the median is taken over `max_pairs` pairs drawn
/// uniformly with replacement from `rng`.
pub fn median_heuristic_lengthscale<R: Rng + ?Sized>(
    points: &PointSet,
    max_pairs: usize,
    rng: &mut R,
) -> Result<f64> {
    let m = points.len();
    if m < 2 {
        return Err(invalid("median heuristic needs at least two points"));
    }
    if max_pairs == 0 {
        return Err(invalid("max_pairs must be positive"));
    }
    if points.coords().iter().any(|c| !c.is_finite()) {
        return Err(invalid("non-finite point coordinate"));
    }
    let dist = |i: usize, j: usize| -> f64 {
        points
            .point(i)
            .iter()
            .zip(points.point(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };
    let total = m * (m - 1) / 2;
    let mut dists = if total <= max_pairs {
        let mut d = Vec::with_capacity(total);
        for i in 0..m {
            for j in (i + 1)..m {
                d.push(dist(i, j));
            }
        }
        d
    } else {
        (0..max_pairs)
            .map(|_| {
                let i = rng.random_range(0..m);
                let mut j = rng.random_range(0..m - 1);
                if j >= i {
                    j += 1;
                }
                dist(i, j)
            })
            .collect()
    };
    let med = lower_median(&mut dists).expect("nonempty");
    if med > 0.0 {
        Ok(med)
    } else {
        Err(Error::ZeroDistance)
    }
}

/// Mercer eigenvalues of the periodic Sobolev kernel under the uniform
/// measure: `1` for the constant, then `m^(-2s)` twice (cosine and sine at
/// frequency `m`), in nonincreasing order. Index `j = 1` is frequency 0 and
/// indices `2m, 2m+1` are frequency `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpectralProfile {
    dim: usize,
    smoothness: u32,
}

impl SpectralProfile {
    pub fn smoothness(&self) -> u32 {
        self.smoothness
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn require_1d(&self) -> Result<()> {
        if self.dim == 1 {
            Ok(())
        } else {
            Err(Error::Unsupported(format!(
                "eigenvalue tail sums are only implemented for dimension 1, got {}",
                self.dim
            )))
        }
    }

    /// The `j`-th eigenvalue, 1-based.
    pub fn eigenvalue(&self, j: usize) -> Result<f64> {
        self.require_1d()?;
        if j == 0 {
            return Err(invalid("eigenvalue index is 1-based"));
        }
        if j == 1 {
            return Ok(1.0);
        }
        let freq = (j / 2) as f64;
        Ok(freq.powf(-2.0 * self.smoothness as f64))
    }

    /// `sum_{j > d} sigma_j`.
    pub fn tail_sum(&self, d: usize) -> Result<f64> {
        self.require_1d()?;
        let q = 2.0 * self.smoothness as f64;
        if d == 0 {
            return Ok(1.0 + 2.0 * zeta(q));
        }
        // After the constant, d - 1 eigenvalues are consumed in cos/sin pairs.
        let consumed = d - 1;
        let full = (consumed / 2) as u64;
        let odd = consumed % 2;
        let mut tail = 2.0 * zeta_tail(q, full + 1);
        if odd == 1 {
            tail -= ((full + 1) as f64).powf(-q);
        }
        Ok(tail.max(0.0))
    }
}

/// Free-function form of [`SpectralProfile::tail_sum`].
pub fn sobolev_tail_sum(spectrum: &SpectralProfile, d: usize) -> Result<f64> {
    spectrum.tail_sum(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::zeta;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sob(p: usize, s: u32) -> KernelSpec {
        KernelSpec::periodic_sobolev(p, s).unwrap()
    }

    #[test]
    fn sobolev_s1_values() {
        let k = sob(1, 1);
        let diag = k.eval(&[0.3], &[0.3]).unwrap();
        assert!((diag - (1.0 + PI * PI / 3.0)).abs() < 1e-13);
        assert!((diag - 4.289868).abs() < 1e-6);
        let half = k.eval(&[0.0], &[0.5]).unwrap();
        assert!((half - (1.0 - PI * PI / 6.0)).abs() < 1e-13);
        assert!((half + 0.644934).abs() < 1e-6);
    }

    #[test]
    fn sobolev_half_matches_alternating_series() {
        // 1 + 2 sum (-1)^m / m^2 = 1 - pi^2/6, summed independently here.
        let mut s = 0.0;
        for m in (1..=2_000_000u64).rev() {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            s += sign / (m as f64 * m as f64);
        }
        let k = sob(1, 1).eval(&[0.0], &[0.5]).unwrap();
        assert!((k - (1.0 + 2.0 * s)).abs() < 1e-11);
    }

    #[test]
    fn sobolev_closed_form_diagonals_match_zeta() {
        for s in 1..=3u32 {
            let d = sobolev_factor_closed_form(s, 0.0);
            assert!((d - (1.0 + 2.0 * zeta(2.0 * s as f64))).abs() < 1e-12, "s = {s}");
        }
    }

    #[test]
    fn sobolev_s5_series_diagonal() {
        let k = sob(1, 5);
        assert!(k.fourier_terms() > 0);
        let d = k.eval(&[0.77], &[0.77]).unwrap();
        assert!((d - (1.0 + 2.0 * zeta(10.0))).abs() < 1e-12);
    }

    #[test]
    fn truncation_level_is_minimal() {
        for s in [2u32, 3, 4, 5, 8] {
            let m = fourier_truncation(s, 1e-12);
            let q = 2.0 * s as f64;
            let bound = |m: f64| 2.0 * m.powf(1.0 - q) / (q - 1.0);
            assert!(bound(m as f64) <= 1e-12);
            assert!(m == 1 || bound(m as f64 - 1.0) > 1e-12);
        }
        assert_eq!(fourier_truncation(5, 1e-12), 19);
    }

    #[test]
    fn series_matches_closed_form_s2_s3() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for s in [2u32, 3] {
            let coeffs = fourier_coefficients(s, fourier_truncation(s, 1e-12));
            for _ in 0..1000 {
                let t: f64 = rng.random();
                let a = sobolev_factor_closed_form(s, t);
                let b = sobolev_factor_series(&coeffs, t);
                assert!((a - b).abs() <= 1e-10, "s={s} t={t} {a} {b}");
            }
        }
    }

    #[test]
    fn series_matches_closed_form_s1_at_feasible_truncation() {
        // s = 1 needs ~2/tol terms; 1e-5 keeps this fast.
        let coeffs = fourier_coefficients(1, fourier_truncation(1, 1e-5));
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let t: f64 = rng.random();
            let a = sobolev_factor_closed_form(1, t);
            let b = sobolev_factor_series(&coeffs, t);
            assert!((a - b).abs() <= 1e-5);
        }
    }

    #[test]
    fn periodicity() {
        let k = sob(2, 2);
        for i in 0..64 {
            let x = i as f64 / 64.0;
            let a = k.eval(&[x, 0.25], &[0.125, 0.5]).unwrap();
            let b = k.eval(&[x + 1.0, 0.25 - 3.0], &[0.125, 0.5]).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn product_kernel_in_two_dims() {
        let k2 = sob(2, 1);
        let k1 = sob(1, 1);
        let v = k2.eval(&[0.1, 0.7], &[0.4, 0.2]).unwrap();
        let w = k1.eval(&[0.1], &[0.4]).unwrap() * k1.eval(&[0.7], &[0.2]).unwrap();
        assert_eq!(v, w);
    }

    #[test]
    fn rbf_values() {
        let k = KernelSpec::rbf(2, 1.5).unwrap();
        assert_eq!(k.eval(&[1.0, -2.0], &[1.0, -2.0]).unwrap(), 1.0);
        let v = k.eval(&[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert!((v - (-25.0 / 4.5_f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn non_finite_input_rejected() {
        let k = sob(1, 1);
        assert!(matches!(k.eval(&[f64::NAN], &[0.0]), Err(Error::InvalidInput(_))));
        let r = KernelSpec::rbf(1, 1.0).unwrap();
        assert!(r.eval(&[f64::INFINITY], &[0.0]).is_err());
        assert!(r.eval(&[0.0, 1.0], &[0.0]).is_err());
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(KernelSpec::periodic_sobolev(0, 1).is_err());
        assert!(KernelSpec::periodic_sobolev(1, 0).is_err());
        assert!(KernelSpec::rbf(1, 0.0).is_err());
        assert!(KernelSpec::rbf(1, f64::NAN).is_err());
    }

    #[test]
    fn gram_examples() {
        let r = KernelSpec::rbf(3, 0.7).unwrap();
        let g = gram_matrix(&r, &PointSet::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap()).unwrap();
        assert_eq!(g.as_slice(), &[1.0]);

        let k = sob(1, 1);
        let g = gram_matrix(&k, &PointSet::from_scalars(&[0.0, 0.5])).unwrap();
        let want = [4.2899, -0.6449, -0.6449, 4.2899];
        for (a, b) in g.as_slice().iter().zip(want) {
            assert!((a - b).abs() < 5e-5);
        }
        assert!(gram_matrix(&k, &PointSet::from_scalars(&[])).is_err());
    }

    #[test]
    fn gram_entries_are_pairwise_calls() {
        let k = sob(2, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<f64> = (0..40).map(|_| rng.random()).collect();
        let pts = PointSet::new(2, pts).unwrap();
        let g = gram_matrix(&k, &pts).unwrap();
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                assert_eq!(g.get(i, j), k.eval(pts.point(i), pts.point(j)).unwrap());
            }
        }
        assert_eq!(g.max_asymmetry(), 0.0);
    }

    #[test]
    fn diagonal_bounds() {
        assert!((sob(1, 1).diagonal_bound() - 2.07120).abs() < 1e-5);
        let k = sob(2, 5).diagonal_bound();
        assert!((k - (1.0 + 2.0 * zeta(10.0))).abs() < 1e-14);
        assert!((k - 3.001989).abs() < 1e-6);
        assert_eq!(KernelSpec::rbf(4, 2.0).unwrap().diagonal_bound(), 1.0);
    }

    #[test]
    fn median_heuristic_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = PointSet::from_rows(&[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(median_heuristic_lengthscale(&p, 10, &mut rng).unwrap(), 5.0);
        let p = PointSet::from_scalars(&[0.0, 1.0, 2.0]);
        assert_eq!(median_heuristic_lengthscale(&p, 10, &mut rng).unwrap(), 1.0);
        let p = PointSet::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(median_heuristic_lengthscale(&p, 10, &mut rng), Err(Error::ZeroDistance)));
        assert!(median_heuristic_lengthscale(&PointSet::from_scalars(&[1.0]), 10, &mut rng).is_err());
    }

    #[test]
    fn median_heuristic_subsampling_is_seeded() {
        let pts: Vec<f64> = (0..200).map(|i| (i as f64).sqrt()).collect();
        let p = PointSet::from_scalars(&pts);
        let a = median_heuristic_lengthscale(&p, 1000, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = median_heuristic_lengthscale(&p, 1000, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        let full = median_heuristic_lengthscale(&p, usize::MAX, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert!((a - full).abs() / full < 0.1);
    }

    #[test]
    fn tail_sum_examples() {
        let sp = sob(1, 1).spectral_profile().unwrap();
        let z2 = PI * PI / 6.0;
        assert!((sp.tail_sum(0).unwrap() - (1.0 + 2.0 * z2)).abs() < 1e-12);
        assert!((sp.tail_sum(1).unwrap() - 2.0 * z2).abs() < 1e-12);
        assert!((sp.tail_sum(3).unwrap() - (2.0 * z2 - 2.0)).abs() < 1e-12);
        assert!((sp.tail_sum(2).unwrap() - (2.0 * z2 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn tail_sum_matches_eigenvalue_enumeration() {
        let sp = sob(1, 3).spectral_profile().unwrap();
        let total = sp.tail_sum(0).unwrap();
        let mut head = 0.0;
        for d in 0..40 {
            assert!((sp.tail_sum(d).unwrap() - (total - head)).abs() < 1e-12, "d={d}");
            head += sp.eigenvalue(d + 1).unwrap();
        }
    }

    #[test]
    fn tail_sum_unsupported_cases() {
        let sp = sob(2, 5).spectral_profile().unwrap();
        assert!(matches!(sp.tail_sum(1), Err(Error::Unsupported(_))));
        assert!(KernelSpec::rbf(1, 1.0).unwrap().spectral_profile().is_err());
    }
}
