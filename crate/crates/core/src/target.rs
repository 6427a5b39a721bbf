//! Target measures with exact kernel means.
//!
//! Two targets are supported:
//!
//! * the uniform measure on the torus `[0,1)^p` with a periodic Sobolev
//!   kernel, where `m_mu = 1` identically (the Bernoulli part integrates to
//!   zero over a period) and hence `||m_mu||^2 = 1`;
//! * the uniform empirical measure on `M` atoms drawn once from a planar
//!   four-component Gaussian mixture, paired with an RBF kernel whose
//!   lengthscale comes from the median heuristic on the atoms.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::kernel::{gram_matrix, median_heuristic_lengthscale, KernelFamily, KernelSpec, DEFAULT_MEDIAN_MAX_PAIRS};
use crate::numeric::CompensatedSum;
use crate::points::PointSet;
use crate::quadrature::PoolProblem;

/// Parameters of the planar Gaussian mixture behind the empirical target.
/// Component means sit at angles `2 pi j / components` on a circle.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureParams {
    pub components: usize,
    pub radius: f64,
    pub component_std: f64,
    pub support_size: usize,
    /// Cap on the number of pairs used by the median heuristic.
    pub median_max_pairs: usize,
}

impl Default for MixtureParams {
    fn default() -> Self {
        Self {
            components: 4,
            radius: 2.5,
            component_std: 0.35,
            support_size: 10_000,
            median_max_pairs: DEFAULT_MEDIAN_MAX_PAIRS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetKind {
    /// Uniform on `[0,1)^p`; the kernel must be periodic Sobolev.
    UniformTorus { kernel: KernelSpec },
    /// Empirical measure on a sampled mixture support with an RBF kernel.
    EmpiricalMixture { params: MixtureParams },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpec {
    kind: TargetKind,
}

impl TargetSpec {
    pub fn uniform_torus(kernel: KernelSpec) -> Result<Self> {
        match kernel.family() {
            KernelFamily::PeriodicSobolev { .. } => {
                Ok(Self { kind: TargetKind::UniformTorus { kernel } })
            }
            KernelFamily::Rbf { .. } => {
                Err(invalid("the uniform torus target pairs only with a periodic Sobolev kernel"))
            }
        }
    }

    pub fn empirical_mixture(params: MixtureParams) -> Result<Self> {
        if params.support_size == 0 {
            return Err(invalid("empirical support size must be at least 1"));
        }
        if params.components == 0 {
            return Err(invalid("mixture needs at least one component"));
        }
        if !(params.component_std >= 0.0 && params.radius.is_finite()) {
            return Err(invalid("mixture radius and std must be finite and nonnegative"));
        }
        Ok(Self { kind: TargetKind::EmpiricalMixture { params } })
    }

    pub fn kind(&self) -> &TargetKind {
        &self.kind
    }
}

#[derive(Debug, Clone)]
enum Measure {
    UniformTorus,
    Empirical {
        support: PointSet,
        /// `1/M` per atom, shared by every weighted sum over the support.
        atom_weights: Vec<f64>,
        /// `m_mu(z_j)` for each atom.
        support_means: Vec<f64>,
    },
}

/// A built target: kernel, realized support (if any) and the cached
/// squared embedding norm `c = ||m_mu||^2`. Immutable once built.
#[derive(Debug, Clone)]
pub struct TargetOracle {
    kernel: KernelSpec,
    measure: Measure,
    embedding_norm_sq: f64,
}

pub fn build_oracle<R: Rng + ?Sized>(spec: &TargetSpec, rng: &mut R) -> Result<TargetOracle> {
    match &spec.kind {
        TargetKind::UniformTorus { kernel } => Ok(TargetOracle {
            kernel: kernel.clone(),
            measure: Measure::UniformTorus,
            embedding_norm_sq: 1.0,
        }),
        TargetKind::EmpiricalMixture { params } => {
            let support = sample_mixture(params, rng);
            let lengthscale = if support.len() == 1 {
                // A single atom has no pairwise distance; any lengthscale
                // gives the same target.
                1.0
            } else {
                median_heuristic_lengthscale(&support, params.median_max_pairs, rng)?
            };
            TargetOracle::empirical(support, KernelSpec::rbf(2, lengthscale)?)
        }
    }
}

fn sample_mixture<R: Rng + ?Sized>(params: &MixtureParams, rng: &mut R) -> PointSet {
    let mut support = PointSet::with_capacity(2, params.support_size);
    for _ in 0..params.support_size {
        let comp = rng.random_range(0..params.components);
        let angle = 2.0 * PI * comp as f64 / params.components as f64;
        let gx: f64 = rng.sample(StandardNormal);
        let gy: f64 = rng.sample(StandardNormal);
        support.push(&[
            params.radius * angle.cos() + params.component_std * gx,
            params.radius * angle.sin() + params.component_std * gy,
        ]);
    }
    support
}

impl TargetOracle {
    /// Uniform measure on `[0,1)^p`; `kernel` must be periodic Sobolev.
    pub fn uniform_torus(kernel: KernelSpec) -> Result<Self> {
        let spec = TargetSpec::uniform_torus(kernel)?;
        let TargetKind::UniformTorus { kernel } = spec.kind else {
            unreachable!("constructed as a torus target")
        };
        Ok(Self { kernel, measure: Measure::UniformTorus, embedding_norm_sq: 1.0 })
    }

    /// Uniform empirical measure on `support` under `kernel`.
    pub fn empirical(support: PointSet, kernel: KernelSpec) -> Result<Self> {
        if support.is_empty() {
            return Err(invalid("empirical support must be nonempty"));
        }
        kernel.check_points(&support)?;
        let m = support.len();
        let atom_weights = vec![1.0 / m as f64; m];
        let support_means: Vec<f64> = (0..m)
            .into_par_iter()
            .map(|i| weighted_kernel_sum(&kernel, support.point(i), &support, &atom_weights))
            .collect();
        let embedding_norm_sq = crate::numeric::dot(&support_means, &atom_weights);
        Ok(Self {
            kernel,
            measure: Measure::Empirical { support, atom_weights, support_means },
            embedding_norm_sq,
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    /// `c = ||m_mu||^2`.
    pub fn embedding_norm_sq(&self) -> f64 {
        self.embedding_norm_sq
    }

    pub fn support(&self) -> Option<&PointSet> {
        match &self.measure {
            Measure::UniformTorus => None,
            Measure::Empirical { support, .. } => Some(support),
        }
    }

    /// Kernel means at the support atoms, in support order.
    pub fn support_means(&self) -> Option<&[f64]> {
        match &self.measure {
            Measure::UniformTorus => None,
            Measure::Empirical { support_means, .. } => Some(support_means),
        }
    }

    /// RBF lengthscale, when the kernel is RBF.
    pub fn lengthscale(&self) -> Option<f64> {
        match self.kernel.family() {
            KernelFamily::Rbf { lengthscale } => Some(lengthscale),
            KernelFamily::PeriodicSobolev { .. } => None,
        }
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    /// `m_mu(x) = int k(x, y) dmu(y)`.
    pub fn kernel_mean(&self, x: &[f64]) -> Result<f64> {
        self.kernel.check_point(x)?;
        Ok(self.kernel_mean_unchecked(x))
    }

    pub(crate) fn kernel_mean_unchecked(&self, x: &[f64]) -> f64 {
        match &self.measure {
            Measure::UniformTorus => 1.0,
            Measure::Empirical { support, atom_weights, .. } => {
                weighted_kernel_sum(&self.kernel, x, support, atom_weights)
            }
        }
    }

    /// `n` i.i.d. draws from the target: uniform on the torus, or atoms
    /// drawn with replacement from the support.
    pub fn sample_pool<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> PointSet {
        match &self.measure {
            Measure::UniformTorus => {
                let p = self.kernel.dim();
                let coords = (0..n * p).map(|_| rng.random::<f64>()).collect();
                PointSet::new(p, coords).expect("dimension is positive")
            }
            Measure::Empirical { support, .. } => {
                let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..support.len())).collect();
                support.select(&idx)
            }
        }
    }

    /// Gram matrix, kernel-mean vector and `c` for a fixed pool.
    pub fn build_pool_problem(&self, pool: &PointSet) -> PoolProblem {
        self.try_build_pool_problem(pool).expect("pool points must be valid kernel inputs")
    }

    pub fn try_build_pool_problem(&self, pool: &PointSet) -> Result<PoolProblem> {
        let gram = gram_matrix(&self.kernel, pool)?;
        let z: Vec<f64> = (0..pool.len())
            .into_par_iter()
            .map(|i| self.kernel_mean_unchecked(pool.point(i)))
            .collect();
        PoolProblem::new(pool.clone(), gram, z, self.embedding_norm_sq)
    }

    /// Writes the empirical support as CSV `index,coord_1,..,coord_p`.
    /// Does nothing for targets without a support.
    pub fn write_support_csv(&self, path: &Path) -> Result<()> {
        let Some(support) = self.support() else {
            return Ok(());
        };
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        let header: Vec<String> = (1..=support.dim()).map(|k| format!("coord_{k}")).collect();
        writeln!(out, "index,{}", header.join(","))?;
        for (i, p) in support.iter().enumerate() {
            let coords: Vec<String> = p.iter().map(|c| format!("{c:?}")).collect();
            writeln!(out, "{i},{}", coords.join(","))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `sum_j w_j k(x, y_j)` in support order. Matches `(K w)_i` bit for bit
/// when `x` is the `i`-th pool point and the pool equals the support.
fn weighted_kernel_sum(kernel: &KernelSpec, x: &[f64], points: &PointSet, weights: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    for (y, &w) in points.iter().zip(weights) {
        acc.add(kernel.eval_unchecked(x, y) * w);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn torus(s: u32) -> TargetOracle {
        let spec = TargetSpec::uniform_torus(KernelSpec::periodic_sobolev(1, s).unwrap()).unwrap();
        build_oracle(&spec, &mut ChaCha8Rng::seed_from_u64(1)).unwrap()
    }

    #[test]
    fn uniform_torus_constants() {
        let o = torus(1);
        assert_eq!(o.embedding_norm_sq(), 1.0);
        assert_eq!(o.kernel_mean(&[0.123]).unwrap(), 1.0);
        assert!(o.support().is_none());
    }

    #[test]
    fn uniform_torus_kernel_mean_matches_quadrature() {
        // Midpoint rule over one period integrates the Bernoulli part to zero.
        let k = KernelSpec::periodic_sobolev(1, 3).unwrap();
        let n = 4096;
        for x in [0.0, 0.3, 0.71] {
            let m: f64 = (0..n)
                .map(|j| k.eval(&[x], &[(j as f64 + 0.5) / n as f64]).unwrap())
                .sum::<f64>()
                / n as f64;
            assert!((m - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn pairing_rules() {
        assert!(TargetSpec::uniform_torus(KernelSpec::rbf(1, 1.0).unwrap()).is_err());
        let p = MixtureParams { support_size: 0, ..Default::default() };
        assert!(TargetSpec::empirical_mixture(p).is_err());
    }

    #[test]
    fn single_atom_empirical() {
        let support = PointSet::from_rows(&[vec![0.3, -1.0]]).unwrap();
        let o = TargetOracle::empirical(support, KernelSpec::rbf(2, 0.8).unwrap()).unwrap();
        assert_eq!(o.embedding_norm_sq(), 1.0);
        assert_eq!(o.kernel_mean(&[0.3, -1.0]).unwrap(), 1.0);
    }

    #[test]
    fn two_atom_empirical() {
        let k = KernelSpec::rbf(2, 1.3).unwrap();
        let (z1, z2) = (vec![0.0, 0.5], vec![1.0, -0.25]);
        let k12 = k.eval(&z1, &z2).unwrap();
        let o = TargetOracle::empirical(PointSet::from_rows(&[z1.clone(), z2]).unwrap(), k).unwrap();
        assert!((o.embedding_norm_sq() - (2.0 + 2.0 * k12) / 4.0).abs() < 1e-15);
        assert!((o.kernel_mean(&z1).unwrap() - (1.0 + k12) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn mixture_oracle_is_consistent() {
        let params = MixtureParams { support_size: 300, ..Default::default() };
        let spec = TargetSpec::empirical_mixture(params).unwrap();
        let o = build_oracle(&spec, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let support = o.support().unwrap();
        assert_eq!(support.len(), 300);
        assert!(o.lengthscale().unwrap() > 0.0);
        // Means are on a circle of radius 2.5.
        let mean_norm: f64 =
            support.iter().map(|p| (p[0] * p[0] + p[1] * p[1]).sqrt()).sum::<f64>() / 300.0;
        assert!((mean_norm - 2.5).abs() < 0.2);
        // c equals the brute-force double sum.
        let k = o.kernel();
        let mut brute = 0.0;
        for a in support.iter() {
            for b in support.iter() {
                brute += k.eval(a, b).unwrap();
            }
        }
        brute /= 300.0 * 300.0;
        assert!((o.embedding_norm_sq() - brute).abs() < 1e-12);
    }

    #[test]
    fn embedding_norm_is_order_robust() {
        let params = MixtureParams { support_size: 500, ..Default::default() };
        let spec = TargetSpec::empirical_mixture(params).unwrap();
        let o = build_oracle(&spec, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let mut idx: Vec<usize> = (0..500).collect();
        idx.reverse();
        idx.rotate_left(137);
        let shuffled = o.support().unwrap().select(&idx);
        let o2 = TargetOracle::empirical(shuffled, o.kernel().clone()).unwrap();
        assert!((o.embedding_norm_sq() - o2.embedding_norm_sq()).abs() <= 1e-12);
    }

    #[test]
    fn pools_are_seeded_and_in_range() {
        let o = torus(1);
        let a = o.sample_pool(3, &mut ChaCha8Rng::seed_from_u64(4));
        let b = o.sample_pool(3, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(a, b);
        assert!(a.coords().iter().all(|&x| (0.0..1.0).contains(&x)));

        let params = MixtureParams { support_size: 50, ..Default::default() };
        let spec = TargetSpec::empirical_mixture(params).unwrap();
        let e = build_oracle(&spec, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let pool = e.sample_pool(5, &mut ChaCha8Rng::seed_from_u64(4));
        let support = e.support().unwrap();
        for p in pool.iter() {
            assert!(support.iter().any(|s| s == p));
        }
    }

    #[test]
    fn pool_problem_single_point_and_duplicates() {
        let o = torus(1);
        let prob = o.build_pool_problem(&PointSet::from_scalars(&[0.4]));
        assert!((prob.gram().get(0, 0) - 4.2899).abs() < 1e-4);
        assert_eq!(prob.z(), &[1.0]);
        assert_eq!(prob.c(), 1.0);

        let prob = o.build_pool_problem(&PointSet::from_scalars(&[0.4, 0.4]));
        assert_eq!(prob.gram().row(0), prob.gram().row(1));
        assert_eq!(prob.z()[0], prob.z()[1]);
    }

    #[test]
    fn pool_problem_on_support_uses_direct_sums() {
        let params = MixtureParams { support_size: 40, ..Default::default() };
        let spec = TargetSpec::empirical_mixture(params).unwrap();
        let o = build_oracle(&spec, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let support = o.support().unwrap().clone();
        let prob = o.build_pool_problem(&support);
        for (i, p) in support.iter().enumerate() {
            let direct: f64 =
                support.iter().map(|q| o.kernel().eval(p, q).unwrap()).sum::<f64>() / 40.0;
            assert!((prob.z()[i] - direct).abs() < 1e-14);
            assert_eq!(prob.z()[i], o.support_means().unwrap()[i]);
        }
    }

    #[test]
    fn support_dump() {
        let params = MixtureParams { support_size: 3, ..Default::default() };
        let spec = TargetSpec::empirical_mixture(params).unwrap();
        let o = build_oracle(&spec, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("support.csv");
        o.write_support_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "index,coord_1,coord_2");
        assert_eq!(lines.len(), 4);
        let x: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(x, o.support().unwrap().point(0)[0]);
    }
}
