//! Convex quadratic programs over the probability simplex,
//!
//! ```text
//! minimize  f(w) = w^T A w - 2 b^T w   subject to  w >= 0, sum(w) = 1,
//! ```
//!
//! by a primal active-set method. On the working face a Newton (KKT) step
//! moves toward the minimizer of `f` on the face's affine hull; if
//! feasibility cuts it short, the blocking atom leaves the face. At the face
//! optimum the Frank-Wolfe vertex (most negative gradient) enters. When
//! round-off stalls this, pairwise Frank-Wolfe steps with exact line search
//! take over for a while. The combination converges to machine precision on
//! the small dense problems this crate produces.
//!
//! Optimality is certified by the Frank-Wolfe duality gap
//! `g(w) = max_i 2(b - Aw)_i - 2(b - Aw)^T w >= f(w) - f(w*)`.

use nalgebra::{DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{invalid, Error, Result};
use crate::matrix::SquareMatrix;
use crate::numeric::{argmin, dot};
use crate::points::PointSet;

pub const DEFAULT_MAX_ITERATIONS: usize = 200_000;

/// Pairwise steps after an active-set stall before the next attempt.
const FACE_STEP_WINDOW: usize = 8;
/// Iterations over which the objective must drop by more than
/// `STALL_RELATIVE_DECREASE * (|f| + max A_ii)` to count as progress.
const STALL_WINDOW: usize = 5_000;
const STALL_RELATIVE_DECREASE: f64 = 1e-15;
/// Relative eigenvalue cutoff of the pseudo-inverse KKT solve. Kept near
/// machine precision: Gram matrices of smooth kernels carry real descent
/// along eigenvalues far below `1e-13 * max`, and the exact line search
/// keeps noisy directions harmless.
const PSEUDO_INVERSE_CUTOFF: f64 = 1e-15;
/// `A w` is recomputed from scratch this often to bound drift.
const REFRESH_INTERVAL: usize = 1_000;

#[derive(Debug, Clone)]
pub struct SimplexQp {
    a: SquareMatrix,
    b: Vec<f64>,
    gap_tolerance: f64,
    max_iterations: usize,
}

impl SimplexQp {
    /// Default tolerance `1e-10 (max_i A_ii + 1)` and 200000 iterations.
    pub fn new(a: SquareMatrix, b: Vec<f64>) -> Result<Self> {
        let n = a.n();
        if n == 0 {
            return Err(invalid("QP needs at least one variable"));
        }
        if b.len() != n {
            return Err(invalid(format!("b has length {}, A is {n}x{n}", b.len())));
        }
        if a.has_non_finite() || b.iter().any(|x| !x.is_finite()) {
            return Err(invalid("non-finite entry in A or b"));
        }
        let scale = a.as_slice().iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(1.0);
        if a.max_asymmetry() > 1e-12 * scale {
            return Err(invalid("A is not symmetric"));
        }
        let gap_tolerance = default_gap_tolerance(&a);
        Ok(Self { a, b, gap_tolerance, max_iterations: DEFAULT_MAX_ITERATIONS })
    }

    pub fn with_gap_tolerance(mut self, tol: f64) -> Result<Self> {
        if !(tol >= 0.0 && tol.is_finite()) {
            return Err(invalid("gap tolerance must be finite and nonnegative"));
        }
        self.gap_tolerance = tol;
        Ok(self)
    }

    pub fn with_max_iterations(mut self, iters: usize) -> Self {
        self.max_iterations = iters;
        self
    }

    pub fn n(&self) -> usize {
        self.a.n()
    }

    pub fn a(&self) -> &SquareMatrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn gap_tolerance(&self) -> f64 {
        self.gap_tolerance
    }

    pub fn max_iterations(&self) -> usize {
        self.max_iterations
    }

    /// `w^T A w - 2 b^T w`.
    pub fn objective(&self, w: &[f64]) -> f64 {
        let aw = self.a.mul_vec(w);
        dot(&aw, w) - 2.0 * dot(&self.b, w)
    }

    /// Frank-Wolfe duality gap at a feasible `w`.
    pub fn duality_gap(&self, w: &[f64]) -> f64 {
        let aw = self.a.mul_vec(w);
        gap_from(&aw, &self.b, w)
    }
}

pub fn default_gap_tolerance(a: &SquareMatrix) -> f64 {
    1e-10 * (a.max_diag() + 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub weights: Vec<f64>,
    pub objective: f64,
    pub gap: f64,
    pub iterations: usize,
}

fn gap_from(aw: &[f64], b: &[f64], w: &[f64]) -> f64 {
    // r = 2(b - Aw); gap = max r - r^T w
    let r: Vec<f64> = aw.iter().zip(b).map(|(x, y)| 2.0 * (y - x)).collect();
    let rmax = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (rmax - dot(&r, w)).max(0.0)
}

/// Clamps negatives, rescales to unit mass, then nudges the largest entry so
/// that the left-to-right sum is exactly 1.
pub(crate) fn normalize_exact(w: &mut [f64]) {
    for x in w.iter_mut() {
        if !(*x > 0.0) {
            *x = 0.0;
        }
    }
    let total = crate::numeric::compensated_sum(w.iter().copied());
    if total > 0.0 {
        for x in w.iter_mut() {
            *x /= total;
        }
    } else {
        let n = w.len() as f64;
        w.iter_mut().for_each(|x| *x = 1.0 / n);
    }
    let big = crate::numeric::argmax(w);
    for _ in 0..4 {
        let s: f64 = w.iter().sum();
        if s == 1.0 {
            break;
        }
        w[big] += 1.0 - s;
    }
}

/// Solves the simplex QP from `start` (uniform weights when `None`).
///
/// Returns [`Error::BudgetExceeded`] carrying the best iterate when the
/// iteration budget runs out first, [`Error::Stalled`] when the objective
/// stops decreasing at floating-point resolution above the tolerance, and [`Error::NegativeCurvature`] if a
/// search direction exposes a negative eigenvalue of `A`.
pub fn solve_simplex_qp(problem: &SimplexQp, start: Option<&[f64]>) -> Result<QpSolution> {
    let n = problem.n();
    let a = &problem.a;
    let b = &problem.b;
    let mut w = match start {
        Some(s) => {
            if s.len() != n {
                return Err(invalid("start has wrong length"));
            }
            if s.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(invalid("start must be nonnegative and finite"));
            }
            let mut s = s.to_vec();
            normalize_exact(&mut s);
            s
        }
        None => vec![1.0 / n as f64; n],
    };
    let curvature_floor = -1e-12 * (a.max_diag().abs() + 1.0);

    let mut aw = a.mul_vec(&w);
    let mut grad = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    let mut active = ActiveSet::new(&w);
    // Pairwise steps left before the active-set phase resumes after a
    // stall; the window doubles on consecutive stalls.
    let mut fallback = 0usize;
    let mut backoff = FACE_STEP_WINDOW;
    let mut stalled = false;
    let mut window_objective = f64::INFINITY;

    while iterations < problem.max_iterations {
        for i in 0..n {
            grad[i] = 2.0 * (aw[i] - b[i]);
        }
        let s = argmin(&grad);
        let gap = (dot(&grad, &w) - grad[s]).max(0.0);
        if gap <= problem.gap_tolerance {
            converged = true;
            break;
        }
        if iterations % STALL_WINDOW == 0 {
            let objective = dot(&aw, &w) - 2.0 * dot(b, &w);
            let resolution = STALL_RELATIVE_DECREASE * (objective.abs() + a.max_diag().abs());
            if window_objective - objective <= resolution {
                stalled = true;
                break;
            }
            window_objective = objective;
        }
        iterations += 1;

        if fallback == 0 {
            let objective = dot(&aw, &w) - 2.0 * dot(b, &w);
            if active.step(a, &grad, &mut w, &mut aw, s, objective, curvature_floor)? {
                continue;
            }
            // The window only grows: stalls come from round-off, which
            // does not go away.
            fallback = backoff;
            backoff = backoff.saturating_mul(2);
        }
        fallback -= 1;

        // Away atom: largest gradient on the support, lowest index on ties.
        let mut away = usize::MAX;
        for i in 0..n {
            if w[i] > 0.0 && (away == usize::MAX || grad[i] > grad[away]) {
                away = i;
            }
        }
        let slope = grad[s] - grad[away];
        if !(slope < 0.0) {
            // Gradient is flat on the support and the gap is only rounding.
            converged = true;
            break;
        }
        let curvature = a.get(s, s) + a.get(away, away) - 2.0 * a.get(s, away);
        if curvature < curvature_floor {
            return Err(Error::NegativeCurvature(curvature));
        }
        let max_step = w[away];
        let step = if curvature > 0.0 { (-slope / (2.0 * curvature)).min(max_step) } else { max_step };
        w[s] += step;
        w[away] = if step >= max_step { 0.0 } else { w[away] - step };
        let (row_s, row_a) = (a.row(s), a.row(away));
        for i in 0..n {
            aw[i] += step * (row_s[i] - row_a[i]);
        }
        active.reset(&w);
        if iterations % REFRESH_INTERVAL == 0 {
            aw = a.mul_vec(&w);
        }
    }

    normalize_exact(&mut w);
    let aw = a.mul_vec(&w);
    let objective = dot(&aw, &w) - 2.0 * dot(b, &w);
    let gap = gap_from(&aw, b, &w);
    let solution = QpSolution { weights: w, objective, gap, iterations };
    let tolerance = problem.gap_tolerance;
    if converged || gap <= tolerance {
        Ok(solution)
    } else if stalled {
        Err(Error::Stalled { best: Box::new(solution), tolerance })
    } else {
        Err(Error::BudgetExceeded { best: Box::new(solution), tolerance })
    }
}

/// How a solve ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Converged,
    BudgetExceeded,
    Stalled,
}

impl QpStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Converged => "ok",
            Self::BudgetExceeded => "budget_exceeded",
            Self::Stalled => "stalled",
        }
    }
}

/// Unpacks a solve into its (best) iterate and how it ended; other errors
/// pass through.
pub fn best_effort(result: Result<QpSolution>) -> Result<(QpSolution, QpStatus)> {
    match result {
        Ok(sol) => Ok((sol, QpStatus::Converged)),
        Err(Error::BudgetExceeded { best, .. }) => Ok((*best, QpStatus::BudgetExceeded)),
        Err(Error::Stalled { best, .. }) => Ok((*best, QpStatus::Stalled)),
        Err(e) => Err(e),
    }
}

/// State of the primal active-set phase: the working face, whether the
/// iterate minimizes `f` on it, the objective when an atom last entered,
/// and the eigendecomposition of the face's KKT matrix.
struct ActiveSet {
    working: Vec<usize>,
    face_optimal: bool,
    objective_at_add: f64,
    kkt: Option<SymmetricEigen<f64, Dyn>>,
}

impl ActiveSet {
    fn new(w: &[f64]) -> Self {
        let mut s = Self { working: Vec::new(), face_optimal: false, objective_at_add: f64::INFINITY, kkt: None };
        s.reset(w);
        s
    }

    fn reset(&mut self, w: &[f64]) {
        self.working = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
        self.face_optimal = false;
        self.kkt = None;
    }

    /// One active-set move: a Newton step on the working face (dropping the
    /// blocking atom if feasibility cuts it short), or, once Newton steps no
    /// longer decrease `f`, entry of the Frank-Wolfe vertex `s`. Newton
    /// steps repeat on an unchanged face as iterative refinement, since
    /// faces of smooth kernels are badly conditioned. Returns `false` on a
    /// numerical stall: `s` already on the face, no decrease since the last
    /// entry, or an entering atom the Newton step would push negative.
    #[allow(clippy::too_many_arguments)]
    fn step(
        &mut self,
        a: &SquareMatrix,
        grad: &[f64],
        w: &mut [f64],
        aw: &mut [f64],
        s: usize,
        objective: f64,
        curvature_floor: f64,
    ) -> Result<bool> {
        let resolution = STALL_RELATIVE_DECREASE * (objective.abs() + a.max_diag().abs());
        if !self.face_optimal {
            let kkt = self.kkt.get_or_insert_with(|| face_kkt(a, &self.working));
            match newton_face_step(a, kkt, grad, w, aw, &self.working, curvature_floor)? {
                FaceMove::Full(decrease) => {
                    if decrease > resolution {
                        return Ok(true);
                    }
                    self.face_optimal = true;
                }
                FaceMove::Blocked(r) => {
                    self.working.swap_remove(r);
                    self.kkt = None;
                    return Ok(true);
                }
                FaceMove::Stalled => {
                    if self.working.iter().any(|&i| w[i] == 0.0) {
                        // A freshly entered atom cannot move off zero.
                        self.reset(w);
                        return Ok(false);
                    }
                    self.face_optimal = true;
                }
            }
        }
        if self.working.contains(&s) || objective >= self.objective_at_add - resolution {
            self.objective_at_add = f64::INFINITY;
            self.reset(w);
            return Ok(false);
        }
        self.objective_at_add = objective;
        self.working.push(s);
        self.face_optimal = false;
        self.kkt = None;
        Ok(true)
    }
}

enum FaceMove {
    /// Took the exact line-search step; carries the decrease of `f`.
    Full(f64),
    /// Stopped at the boundary; the atom at this working-set position hit zero.
    Blocked(usize),
    /// No descent along the Newton direction.
    Stalled,
}

/// Eigendecomposition of the bordered KKT matrix `[A_SS 1; 1^T 0]`.
fn face_kkt(a: &SquareMatrix, working: &[usize]) -> SymmetricEigen<f64, Dyn> {
    let k = working.len();
    let mut kkt = DMatrix::<f64>::zeros(k + 1, k + 1);
    for (r, &i) in working.iter().enumerate() {
        for (c, &j) in working.iter().enumerate() {
            kkt[(r, c)] = a.get(i, j);
        }
        kkt[(r, k)] = 1.0;
        kkt[(k, r)] = 1.0;
    }
    SymmetricEigen::new(kkt)
}

/// Newton step toward the minimizer of `f` on the affine hull of the face
/// spanned by `working`, with exact line search, clipped to stay feasible.
fn newton_face_step(
    a: &SquareMatrix,
    eig: &SymmetricEigen<f64, Dyn>,
    grad: &[f64],
    w: &mut [f64],
    aw: &mut [f64],
    working: &[usize],
    curvature_floor: f64,
) -> Result<FaceMove> {
    let k = working.len();
    if k < 2 {
        return Ok(FaceMove::Stalled);
    }
    // Newton direction d on the face: A_SS d + mu 1 = -grad_S / 2, 1^T d = 0,
    // solved by a pseudo-inverse since A_SS may be singular.
    let mut rhs = DVector::<f64>::zeros(k + 1);
    for (r, &i) in working.iter().enumerate() {
        rhs[r] = -0.5 * grad[i];
    }
    let cutoff = PSEUDO_INVERSE_CUTOFF * eig.eigenvalues.amax().max(1.0);
    let coeffs = eig.eigenvectors.tr_mul(&rhs);
    let mut sol = DVector::<f64>::zeros(k + 1);
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs() > cutoff {
            sol.axpy(coeffs[j] / lambda, &eig.eigenvectors.column(j), 1.0);
        }
    }
    let mut dir: Vec<f64> = sol.iter().take(k).copied().collect();
    // Project onto sum zero against round-off.
    let mean = dir.iter().sum::<f64>() / k as f64;
    dir.iter_mut().for_each(|d| *d -= mean);

    let slope: f64 = working.iter().zip(&dir).map(|(&i, d)| grad[i] * d).sum();
    if !(slope < 0.0) {
        return Ok(FaceMove::Stalled);
    }
    let mut ad = vec![0.0; w.len()];
    for (&j, &dj) in working.iter().zip(&dir) {
        if dj != 0.0 {
            for (x, &aij) in ad.iter_mut().zip(a.row(j)) {
                *x += dj * aij;
            }
        }
    }
    let curvature: f64 = working.iter().zip(&dir).map(|(&i, d)| ad[i] * d).sum();
    let dir_norm_sq: f64 = dir.iter().map(|d| d * d).sum();
    if curvature < curvature_floor * dir_norm_sq {
        return Err(Error::NegativeCurvature(curvature / dir_norm_sq));
    }
    let mut max_step = f64::INFINITY;
    let mut blocking = usize::MAX;
    for (r, (&i, &d)) in working.iter().zip(&dir).enumerate() {
        if d < 0.0 {
            let t = w[i] / -d;
            if t < max_step {
                max_step = t;
                blocking = r;
            }
        }
    }
    let exact = if curvature > 0.0 { -slope / (2.0 * curvature) } else { f64::INFINITY };
    let step = exact.min(max_step);
    if !step.is_finite() || step <= 0.0 {
        return Ok(FaceMove::Stalled);
    }
    let blocked = step >= max_step;
    for (r, (&i, &d)) in working.iter().zip(&dir).enumerate() {
        w[i] = if blocked && r == blocking { 0.0 } else { (w[i] + step * d).max(0.0) };
    }
    for (x, y) in aw.iter_mut().zip(&ad) {
        *x += step * y;
    }
    if blocked {
        Ok(FaceMove::Blocked(blocking))
    } else {
        Ok(FaceMove::Full(-step * slope - step * step * curvature.max(0.0)))
    }
}

/// Euclidean distance from `target` to the convex hull of `points`, with the
/// minimizing convex weights. Solves the simplex QP with
/// `A_ij = (Y_i - t) . (Y_j - t)` and `b = 0`.
pub fn hull_distance(points: &PointSet, target: &[f64], gap_tolerance: f64) -> Result<(f64, Vec<f64>)> {
    if points.is_empty() {
        return Err(invalid("hull of an empty point set"));
    }
    if target.len() != points.dim() {
        return Err(invalid("target dimension differs from points"));
    }
    let n = points.len();
    let centered: Vec<Vec<f64>> = points
        .iter()
        .map(|p| p.iter().zip(target).map(|(x, t)| x - t).collect())
        .collect();
    let a = SquareMatrix::from_fn(n, |i, j| dot(&centered[i], &centered[j]));
    let qp = SimplexQp::new(a, vec![0.0; n])?.with_gap_tolerance(gap_tolerance)?;
    let sol = solve_simplex_qp(&qp, None)?;
    Ok((sol.objective.max(0.0).sqrt(), sol.weights))
}
