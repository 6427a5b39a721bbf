//! Positive-weight quadrature rules on a fixed pool and their exact
//! worst-case error.
//!
//! The squared worst-case error of weights `w` on a pool is
//! `c - 2 z^T w + w^T K w`. Frank-Wolfe runs on `J(w) = wce(w)^2 / 2` over
//! the simplex, starting from the single atom minimizing `K_ii - 2 z_i` and
//! moving toward the atom minimizing the score `(K w - z)_i` each step.

use std::fmt;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::matrix::SquareMatrix;
use crate::numeric::{argmax, argmin, dot, CompensatedSum};
use crate::points::PointSet;
use crate::qp::{normalize_exact, solve_simplex_qp, QpStatus, SimplexQp};
use crate::target::TargetOracle;

/// Frank-Wolfe recomputes its running scores from scratch this often.
pub const FW_REFRESH_INTERVAL: usize = 10_000;

/// One trial's frozen data: pool points, Gram matrix `K`, kernel means `z`
/// and `c = ||m_mu||^2`.
#[derive(Debug, Clone)]
pub struct PoolProblem {
    points: PointSet,
    gram: SquareMatrix,
    z: Vec<f64>,
    c: f64,
}

impl PoolProblem {
    pub fn new(points: PointSet, gram: SquareMatrix, z: Vec<f64>, c: f64) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(invalid("pool must be nonempty"));
        }
        if gram.n() != n || z.len() != n {
            return Err(invalid(format!(
                "pool of {n} points with a {}x{} Gram matrix and {} kernel means",
                gram.n(),
                gram.n(),
                z.len()
            )));
        }
        if !(c.is_finite() && c >= 0.0) {
            return Err(invalid("embedding norm must be finite and nonnegative"));
        }
        Ok(Self { points, gram, z, c })
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn gram(&self) -> &SquareMatrix {
        &self.gram
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// Same problem with the pool reordered: new index `k` is old `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            points: self.points.select(perm),
            gram: self.gram.permuted(perm),
            z: perm.iter().map(|&i| self.z[i]).collect(),
            c: self.c,
        }
    }

    /// `c - 2 z^T w + w^T K w`, unclamped, arranged as
    /// `sum_i w_i (Kw - z)_i + (c - z^T w)` so that exact representations
    /// cancel term by term.
    pub fn wce_sq_raw(&self, w: &[f64]) -> Result<f64> {
        if w.len() != self.len() {
            return Err(invalid(format!("{} weights for a pool of {}", w.len(), self.len())));
        }
        let kw = self.gram.mul_vec(w);
        let mut acc = CompensatedSum::new();
        for ((&wi, &kwi), &zi) in w.iter().zip(&kw).zip(&self.z) {
            acc.add(wi * (kwi - zi));
        }
        acc.add(self.c - dot(&self.z, w));
        Ok(acc.value())
    }

    /// `J(w) = wce(w)^2 / 2`, unclamped.
    pub fn objective(&self, w: &[f64]) -> Result<f64> {
        Ok(0.5 * self.wce_sq_raw(w)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    FwFixed,
    FwLineSearch,
    Cqp,
    MonteCarlo,
    Herding,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::FwFixed => "fw_fixed",
            Method::FwLineSearch => "fw_linesearch",
            Method::Cqp => "cqp",
            Method::MonteCarlo => "mc",
            Method::Herding => "herding",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepRule {
    /// `gamma_t = 2 / (t + 2)`.
    Fixed,
    /// Exact minimizer of the objective along the current segment.
    LineSearch,
}

impl StepRule {
    pub fn as_str(&self) -> &'static str {
        match self {
            StepRule::Fixed => "fixed",
            StepRule::LineSearch => "linesearch",
        }
    }
}

impl fmt::Display for StepRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Nonnegative weights summing to one, tagged with how they were made.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexWeights {
    weights: Vec<f64>,
    method: Method,
    iterations: Option<usize>,
    gap: Option<f64>,
}

impl SimplexWeights {
    /// Checks the simplex constraints to within `1e-12` and tags the result.
    pub fn new(weights: Vec<f64>, method: Method) -> Result<Self> {
        if weights.is_empty() {
            return Err(invalid("empty weight vector"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(invalid("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { weights, method, iterations: None, gap: None })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// Frank-Wolfe steps (FW) or solver iterations (CQP).
    pub fn iterations(&self) -> Option<usize> {
        self.iterations
    }

    /// Certified duality gap of the CQP solve.
    pub fn gap(&self) -> Option<f64> {
        self.gap
    }

    /// Number of strictly positive weights.
    pub fn support_size(&self) -> usize {
        self.weights.iter().filter(|&&w| w > 0.0).count()
    }
}

/// A rule `Q(f) = sum_i w_i f(x_i)`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    points: PointSet,
    weights: SimplexWeights,
}

impl QuadratureRule {
    pub fn new(points: PointSet, weights: SimplexWeights) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(invalid("rule has different numbers of points and weights"));
        }
        Ok(Self { points, weights })
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn weights(&self) -> &SimplexWeights {
        &self.weights
    }

    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        let values: Vec<f64> = self.points.iter().map(f).collect();
        dot(&values, self.weights.as_slice())
    }

    /// Worst-case error against the oracle's target.
    pub fn wce(&self, oracle: &TargetOracle) -> Result<f64> {
        let problem = oracle.try_build_pool_problem(&self.points)?;
        wce(&problem, &self.weights)
    }
}

/// `sqrt(max(c - 2 z^T w + w^T K w, 0))`; the clamp only absorbs round-off.
pub fn wce(problem: &PoolProblem, w: &SimplexWeights) -> Result<f64> {
    Ok(problem.wce_sq_raw(w.as_slice())?.max(0.0).sqrt())
}

/// Equal weights `1/N`.
pub fn monte_carlo_weights(n: usize) -> SimplexWeights {
    assert!(n >= 1, "Monte Carlo weights need N >= 1");
    SimplexWeights {
        weights: vec![1.0 / n as f64; n],
        method: Method::MonteCarlo,
        iterations: None,
        gap: None,
    }
}

/// Frank-Wolfe over the convex hull of the pool atoms for `iterations`
/// steps. Ties in the initial choice and the linear minimization go to the
/// lowest index. Costs `O(N)` per step after the Gram matrix is built.
pub fn fw_quadrature(problem: &PoolProblem, iterations: usize, step_rule: StepRule) -> SimplexWeights {
    let k = problem.gram();
    let z = problem.z();
    let n = problem.len();

    let init: Vec<f64> = (0..n).map(|i| k.get(i, i) - 2.0 * z[i]).collect();
    let i0 = argmin(&init);
    let mut w = vec![0.0; n];
    w[i0] = 1.0;
    let mut kw = k.row(i0).to_vec();
    let mut zw = z[i0];
    let mut wkw = k.get(i0, i0);
    let mut scores = vec![0.0; n];

    for t in 0..iterations {
        if t > 0 && t % FW_REFRESH_INTERVAL == 0 {
            kw = k.mul_vec(&w);
            zw = dot(z, &w);
            wkw = dot(&kw, &w);
        }
        for i in 0..n {
            scores[i] = kw[i] - z[i];
        }
        let i = argmin(&scores);
        let gamma = match step_rule {
            StepRule::Fixed => 2.0 / (t as f64 + 2.0),
            StepRule::LineSearch => {
                let num = (z[i] - kw[i]) - (zw - wkw);
                let den = k.get(i, i) - 2.0 * kw[i] + wkw;
                if den > 0.0 {
                    (num / den).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            }
        };
        if gamma == 0.0 {
            continue;
        }
        let keep = 1.0 - gamma;
        wkw = keep * keep * wkw + 2.0 * gamma * keep * kw[i] + gamma * gamma * k.get(i, i);
        zw = keep * zw + gamma * z[i];
        for x in w.iter_mut() {
            *x *= keep;
        }
        w[i] += gamma;
        for (x, &kij) in kw.iter_mut().zip(k.row(i)) {
            *x = keep * *x + gamma * kij;
        }
    }

    normalize_exact(&mut w);
    let method = match step_rule {
        StepRule::Fixed => Method::FwFixed,
        StepRule::LineSearch => Method::FwLineSearch,
    };
    SimplexWeights { weights: w, method, iterations: Some(iterations), gap: None }
}

/// Gap tolerance used for the pool-optimal weights, relative to the
/// largest Gram diagonal.
pub const CQP_RELATIVE_GAP_TOLERANCE: f64 = 1e-13;

/// Pool-optimal simplex weights, solving `min_w w^T K w - 2 z^T w`.
///
/// On budget exhaustion the error carries the best iterate.
pub fn cqp_quadrature(problem: &PoolProblem) -> Result<SimplexWeights> {
    let tol = CQP_RELATIVE_GAP_TOLERANCE * (problem.gram().max_diag() + 1.0);
    cqp_quadrature_with(problem, tol, crate::qp::DEFAULT_MAX_ITERATIONS)
}

pub fn cqp_quadrature_with(
    problem: &PoolProblem,
    gap_tolerance: f64,
    max_iterations: usize,
) -> Result<SimplexWeights> {
    let qp = SimplexQp::new(problem.gram().clone(), problem.z().to_vec())?
        .with_gap_tolerance(gap_tolerance)?
        .with_max_iterations(max_iterations);
    let sol = solve_simplex_qp(&qp, None)?;
    Ok(SimplexWeights {
        weights: sol.weights,
        method: Method::Cqp,
        iterations: Some(sol.iterations),
        gap: Some(sol.gap),
    })
}

/// Converts an unconverged CQP solve (budget exhausted or stalled at
/// round-off) into its best iterate, reporting how the solve ended.
pub fn cqp_best_effort(result: Result<SimplexWeights>) -> Result<(SimplexWeights, QpStatus)> {
    let (best, status) = match result {
        Ok(w) => return Ok((w, QpStatus::Converged)),
        Err(Error::BudgetExceeded { best, .. }) => (best, QpStatus::BudgetExceeded),
        Err(Error::Stalled { best, .. }) => (best, QpStatus::Stalled),
        Err(e) => return Err(e),
    };
    let weights = SimplexWeights {
        weights: best.weights,
        method: Method::Cqp,
        iterations: Some(best.iterations),
        gap: Some(best.gap),
    };
    Ok((weights, status))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateMode {
    /// A fresh set of `size` i.i.d. target draws at every step.
    Resample { size: usize },
    /// The oracle's full empirical support, fixed across steps.
    GlobalSupport,
}

/// Equal-weight kernel herding. After `t` selections the next point
/// maximizes `m_mu(x) - (1/(t+1)) sum_{i<=t} k(x_i, x)` over the candidates;
/// ties go to the first candidate.
pub fn herding_quadrature<R: Rng + ?Sized>(
    oracle: &TargetOracle,
    n: usize,
    mode: CandidateMode,
    rng: &mut R,
) -> Result<QuadratureRule> {
    if n == 0 {
        return Err(invalid("herding needs N >= 1"));
    }
    let kernel = oracle.kernel();
    let mut selected = PointSet::with_capacity(oracle.dim(), n);
    match mode {
        CandidateMode::GlobalSupport => {
            let (Some(support), Some(means)) = (oracle.support(), oracle.support_means()) else {
                return Err(invalid("global herding needs a target with a finite support"));
            };
            let mut penalty = vec![0.0; support.len()];
            let mut scores = vec![0.0; support.len()];
            for t in 0..n {
                let scale = 1.0 / (t as f64 + 1.0);
                for (j, s) in scores.iter_mut().enumerate() {
                    *s = means[j] - scale * penalty[j];
                }
                let best = argmax(&scores);
                let x = support.point(best).to_vec();
                for (j, p) in penalty.iter_mut().enumerate() {
                    *p += kernel.eval_unchecked(&x, support.point(j));
                }
                selected.push(&x);
            }
        }
        CandidateMode::Resample { size } => {
            if size == 0 {
                return Err(invalid("resample herding needs R >= 1"));
            }
            let mut scores = vec![0.0; size];
            for t in 0..n {
                let candidates = oracle.sample_pool(size, rng);
                let scale = 1.0 / (t as f64 + 1.0);
                for (j, cand) in candidates.iter().enumerate() {
                    let penalty: f64 = selected.iter().map(|x| kernel.eval_unchecked(x, cand)).sum();
                    scores[j] = oracle.kernel_mean_unchecked(cand) - scale * penalty;
                }
                let best = argmax(&scores);
                selected.push(candidates.point(best));
            }
        }
    }
    let mut weights = monte_carlo_weights(n);
    weights.method = Method::Herding;
    QuadratureRule::new(selected, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelSpec;
    use crate::target::{build_oracle, MixtureParams, TargetSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn torus_oracle(s: u32) -> TargetOracle {
        let spec = TargetSpec::uniform_torus(KernelSpec::periodic_sobolev(1, s).unwrap()).unwrap();
        build_oracle(&spec, &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
    }

    fn torus_problem(n: usize, seed: u64) -> PoolProblem {
        let o = torus_oracle(1);
        let pool = o.sample_pool(n, &mut ChaCha8Rng::seed_from_u64(seed));
        o.build_pool_problem(&pool)
    }

    #[test]
    fn single_point_wce() {
        let p = torus_problem(1, 1);
        let w = monte_carlo_weights(1);
        assert!((wce(&p, &w).unwrap() - (PI * PI / 3.0).sqrt()).abs() < 1e-12);
        assert!((wce(&p, &w).unwrap() - 1.81380).abs() < 1e-5);
    }

    #[test]
    fn wce_length_mismatch() {
        let p = torus_problem(3, 1);
        assert!(matches!(wce(&p, &monte_carlo_weights(2)), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn monte_carlo_weights_examples() {
        assert_eq!(monte_carlo_weights(4).as_slice(), &[0.25; 4]);
        assert_eq!(monte_carlo_weights(1).as_slice(), &[1.0]);
    }

    #[test]
    fn fw_zero_steps_is_initial_atom() {
        let p = torus_problem(9, 2);
        let w = fw_quadrature(&p, 0, StepRule::Fixed);
        let init: Vec<f64> = (0..9).map(|i| p.gram().get(i, i) - 2.0 * p.z()[i]).collect();
        let i0 = argmin(&init);
        for (i, &x) in w.as_slice().iter().enumerate() {
            assert_eq!(x, if i == i0 { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn fw_first_fixed_step_overwrites() {
        let p = torus_problem(9, 3);
        let w0 = fw_quadrature(&p, 0, StepRule::Fixed);
        let scores: Vec<f64> = p.gram().mul_vec(w0.as_slice()).iter().zip(p.z()).map(|(a, b)| a - b).collect();
        let pick = argmin(&scores);
        let w1 = fw_quadrature(&p, 1, StepRule::Fixed);
        assert_eq!(w1.as_slice()[pick], 1.0);
        assert_eq!(w1.support_size(), 1);
    }

    #[test]
    fn fw_single_atom_pool() {
        let p = torus_problem(1, 4);
        for rule in [StepRule::Fixed, StepRule::LineSearch] {
            let w = fw_quadrature(&p, 17, rule);
            assert_eq!(w.as_slice(), &[1.0]);
            let expect = p.c() - 2.0 * p.z()[0] + p.gram().get(0, 0);
            assert!((wce(&p, &w).unwrap().powi(2) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn fw_matches_dense_reference_iteration() {
        // Same algorithm with K w recomputed densely every step.
        let p = torus_problem(12, 5);
        for rule in [StepRule::Fixed, StepRule::LineSearch] {
            let k = p.gram();
            let z = p.z();
            let init: Vec<f64> = (0..12).map(|i| k.get(i, i) - 2.0 * z[i]).collect();
            let mut w = vec![0.0; 12];
            w[argmin(&init)] = 1.0;
            for t in 0..50 {
                let kw = k.mul_vec(&w);
                let s: Vec<f64> = kw.iter().zip(z).map(|(a, b)| a - b).collect();
                let i = argmin(&s);
                let gamma = match rule {
                    StepRule::Fixed => 2.0 / (t as f64 + 2.0),
                    StepRule::LineSearch => {
                        let wkw = dot(&kw, &w);
                        let zw = dot(z, &w);
                        let den = k.get(i, i) - 2.0 * kw[i] + wkw;
                        if den > 0.0 { (((z[i] - kw[i]) - (zw - wkw)) / den).clamp(0.0, 1.0) } else { 0.0 }
                    }
                };
                for x in w.iter_mut() {
                    *x *= 1.0 - gamma;
                }
                w[i] += gamma;
            }
            let fast = fw_quadrature(&p, 50, rule);
            for (a, b) in fast.as_slice().iter().zip(&w) {
                assert!((a - b).abs() < 1e-12, "{rule}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn fw_gap_bound_small_pool() {
        let p = torus_problem(16, 6);
        let kappa_sq = KernelSpec::periodic_sobolev(1, 1).unwrap().diagonal_bound().powi(2);
        let t = 256;
        let fw = fw_quadrature(&p, t, StepRule::Fixed);
        let cqp = cqp_quadrature(&p).unwrap();
        let gap = p.objective(fw.as_slice()).unwrap() - p.objective(cqp.as_slice()).unwrap();
        let bound = 8.0 * kappa_sq / (t as f64 + 2.0);
        assert!((bound - 0.1330).abs() < 1e-3);
        assert!(gap <= bound + 1e-10, "gap {gap} bound {bound}");
    }

    #[test]
    fn cqp_single_and_ordering() {
        let p = torus_problem(1, 7);
        assert_eq!(cqp_quadrature(&p).unwrap().as_slice(), &[1.0]);
        let p = torus_problem(20, 8);
        let cqp = wce(&p, &cqp_quadrature(&p).unwrap()).unwrap();
        assert!(cqp <= wce(&p, &monte_carlo_weights(20)).unwrap() + 1e-8);
    }

    #[test]
    fn cqp_duplicate_points() {
        let o = torus_oracle(1);
        let pool = PointSet::from_scalars(&[0.3, 0.3, 0.3]);
        let p = o.build_pool_problem(&pool);
        let single = o.build_pool_problem(&PointSet::from_scalars(&[0.3]));
        let a = wce(&p, &cqp_quadrature(&p).unwrap()).unwrap();
        let b = wce(&single, &monte_carlo_weights(1)).unwrap();
        assert!((a - b).abs() < 1e-12);
        for rule in [StepRule::Fixed, StepRule::LineSearch] {
            let w = fw_quadrature(&p, 10, rule);
            assert!((wce(&p, &w).unwrap() - b).abs() < 1e-12);
        }
    }

    #[test]
    fn wce_is_permutation_equivariant() {
        let p = torus_problem(10, 9);
        let w = fw_quadrature(&p, 40, StepRule::Fixed);
        let perm = [3, 7, 0, 9, 1, 5, 2, 8, 6, 4];
        let q = p.permuted(&perm);
        let pw: Vec<f64> = perm.iter().map(|&i| w.as_slice()[i]).collect();
        let a = wce(&p, &w).unwrap();
        let b = q.wce_sq_raw(&pw).unwrap().max(0.0).sqrt();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn herding_global_single_atom() {
        let support = PointSet::from_rows(&[vec![0.5, 0.5]]).unwrap();
        let o = TargetOracle::empirical(support, KernelSpec::rbf(2, 1.0).unwrap()).unwrap();
        let rule = herding_quadrature(&o, 5, CandidateMode::GlobalSupport, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(rule.points().iter().all(|p| p == [0.5, 0.5]));
        assert!(rule.wce(&o).unwrap() < 1e-8);
    }

    #[test]
    fn herding_resample_first_pick_is_first_candidate() {
        let o = torus_oracle(1);
        let rule = herding_quadrature(&o, 1, CandidateMode::Resample { size: 16 }, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let cands = o.sample_pool(16, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(rule.points().point(0), cands.point(0));
    }

    #[test]
    fn herding_global_full_budget_is_sane() {
        let params = MixtureParams { support_size: 30, ..Default::default() };
        let o = build_oracle(&TargetSpec::empirical_mixture(params).unwrap(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let rule = herding_quadrature(&o, 30, CandidateMode::GlobalSupport, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(rule.points().len(), 30);
        assert!(rule.wce(&o).unwrap() >= 0.0);
        assert_eq!(rule.weights().method(), Method::Herding);
    }

    #[test]
    fn herding_improves_on_random_points_in_torus() {
        let o = torus_oracle(1);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rule = herding_quadrature(&o, 16, CandidateMode::Resample { size: 256 }, &mut rng).unwrap();
        // Monte Carlo expectation is pi^2 / (3 N).
        assert!(rule.wce(&o).unwrap().powi(2) < PI * PI / 48.0);
    }

    #[test]
    fn herding_rejects_bad_modes() {
        let o = torus_oracle(1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(herding_quadrature(&o, 3, CandidateMode::GlobalSupport, &mut rng).is_err());
        assert!(herding_quadrature(&o, 3, CandidateMode::Resample { size: 0 }, &mut rng).is_err());
        assert!(herding_quadrature(&o, 0, CandidateMode::Resample { size: 4 }, &mut rng).is_err());
    }

    #[test]
    fn simplex_weights_validation() {
        assert!(SimplexWeights::new(vec![0.5, 0.5], Method::Cqp).is_ok());
        assert!(SimplexWeights::new(vec![0.5, 0.6], Method::Cqp).is_err());
        assert!(SimplexWeights::new(vec![-0.5, 1.5], Method::Cqp).is_err());
        assert!(SimplexWeights::new(vec![], Method::Cqp).is_err());
    }
}
