//! Monte-Carlo checks of the random convex-hull results, plus the analytic
//! worst-case error bound used as a figure overlay.
//!
//! * One-sided inequality: for a centered `W` with `|W| <= M`,
//!   `P(mean of n copies <= 2M/n) >= 1/2`.
//! * Convex-hull approximation: for a centered `X` in `R^d` with `|X| <= M`
//!   and `N >= 6dn` copies, `P(dist(0, conv{X_i}) <= 2M/n) > 1 - 2^-d`.
//!   Without centering the threshold becomes `4M / floor(N/(6d))`.
//! * Bound overlay: `E_N(d) = 2 sqrt(sum_{j>d} sigma_j) + 4 kappa / n_d` with
//!   `n_d = floor(N / (6(d+1)))`.
//!
//! Every law here has an exact norm bound and an analytic mean, so no
//! quantity under test is estimated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::function::beta::beta_reg;

use crate::error::{invalid, Error, Result};
use crate::kernel::SpectralProfile;
use crate::numeric::split_seed;
use crate::points::PointSet;
use crate::qp::hull_distance;

/// Fewest trials for which a confidence bound is reported.
pub const MIN_TRIALS: usize = 100;

/// One-sided confidence level of every reported bound.
pub const CONFIDENCE: f64 = 0.99;

/// Gap tolerance for the hull-distance solves (on squared distance).
pub const HULL_GAP_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum BoundedVectorLaw {
    /// `+1` or `-1` with equal probability.
    RademacherScalar,
    /// Uniform on `[-1, 1]^d`.
    UniformCube { dim: usize },
    /// Uniform on the unit sphere in `R^d`.
    UniformSphere { dim: usize },
    /// `shift + Uniform[-1, 1]^d`.
    ShiftedUniformCube { shift: Vec<f64> },
}

impl BoundedVectorLaw {
    pub fn dim(&self) -> usize {
        match self {
            Self::RademacherScalar => 1,
            Self::UniformCube { dim } | Self::UniformSphere { dim } => *dim,
            Self::ShiftedUniformCube { shift } => shift.len(),
        }
    }

    /// Exact almost-sure bound on `|X|`.
    pub fn bound(&self) -> f64 {
        match self {
            Self::RademacherScalar | Self::UniformSphere { .. } => 1.0,
            Self::UniformCube { dim } => (*dim as f64).sqrt(),
            Self::ShiftedUniformCube { shift } => {
                shift.iter().map(|s| s * s).sum::<f64>().sqrt() + (shift.len() as f64).sqrt()
            }
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        match self {
            Self::ShiftedUniformCube { shift } => shift.clone(),
            other => vec![0.0; other.dim()],
        }
    }

    pub fn is_centered(&self) -> bool {
        self.mean().iter().all(|&m| m == 0.0)
    }

    fn validate(&self) -> Result<()> {
        if self.dim() == 0 {
            return Err(invalid("law dimension must be at least 1"));
        }
        if let Self::ShiftedUniformCube { shift } = self {
            if shift.iter().any(|s| !s.is_finite()) {
                return Err(invalid("non-finite shift"));
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        out.clear();
        match self {
            Self::RademacherScalar => out.push(if rng.random::<bool>() { 1.0 } else { -1.0 }),
            Self::UniformCube { dim } => {
                out.extend((0..*dim).map(|_| rng.random_range(-1.0..=1.0)));
            }
            Self::UniformSphere { dim } => loop {
                out.clear();
                out.extend((0..*dim).map(|_| rng.sample::<f64, _>(StandardNormal)));
                let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    out.iter_mut().for_each(|x| *x /= norm);
                    break;
                }
            },
            Self::ShiftedUniformCube { shift } => {
                out.extend(shift.iter().map(|s| s + rng.random_range(-1.0..=1.0)));
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryTrialReport {
    pub trials: usize,
    pub successes: usize,
    pub empirical_probability: f64,
    pub guaranteed_probability: f64,
    /// One-sided 99% Clopper-Pearson lower bound on the success probability.
    pub lower_confidence_bound: f64,
    /// Event threshold (the distance or mean bound being tested).
    pub threshold: f64,
    /// Samples drawn per trial.
    pub samples_per_trial: usize,
}

impl TheoryTrialReport {
    fn new(trials: usize, successes: usize, guaranteed: f64, threshold: f64, samples: usize) -> Self {
        Self {
            trials,
            successes,
            empirical_probability: successes as f64 / trials as f64,
            guaranteed_probability: guaranteed,
            lower_confidence_bound: clopper_pearson_lower(successes, trials, CONFIDENCE),
            threshold,
            samples_per_trial: samples,
        }
    }

    /// Binomial standard error of the empirical probability.
    pub fn standard_error(&self) -> f64 {
        let p = self.empirical_probability;
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    /// The 99% lower bound clears the guaranteed probability.
    pub fn meets_guarantee(&self) -> bool {
        self.lower_confidence_bound >= self.guaranteed_probability
    }
}

/// Lower end of the one-sided Clopper-Pearson interval at `confidence`:
/// the `p` with `P(Bin(n, p) >= k) = 1 - confidence`.
pub fn clopper_pearson_lower(successes: usize, trials: usize, confidence: f64) -> f64 {
    assert!(successes <= trials && trials > 0);
    if successes == 0 {
        return 0.0;
    }
    let alpha = 1.0 - confidence;
    let (a, b) = (successes as f64, (trials - successes + 1) as f64);
    // beta_reg(a, b, p) = P(Bin(n, p) >= k) is increasing in p.
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if beta_reg(a, b, mid) < alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(split_seed(seed, &[trial as u64]))
}

/// Estimates `P(mean of n draws <= 2M/n)` for a centered scalar law.
pub fn verify_one_sided(law: &BoundedVectorLaw, n: usize, trials: usize, seed: u64) -> Result<TheoryTrialReport> {
    law.validate()?;
    if law.dim() != 1 || !law.is_centered() {
        return Err(invalid("one-sided check needs a centered scalar law"));
    }
    if n == 0 {
        return Err(invalid("block size n must be at least 1"));
    }
    if trials < MIN_TRIALS {
        return Err(Error::TooFewTrials(trials, MIN_TRIALS));
    }
    let bound = law.bound();
    let threshold = 2.0 * bound / n as f64;
    let successes = (0..trials)
        .into_par_iter()
        .filter(|&t| {
            let mut rng = trial_rng(seed, t);
            let mut buf = Vec::with_capacity(1);
            let mut sum = 0.0;
            for _ in 0..n {
                law.sample(&mut rng, &mut buf);
                sum += buf[0];
            }
            sum / n as f64 <= threshold
        })
        .count();
    Ok(TheoryTrialReport::new(trials, successes, 0.5, threshold, n))
}

/// Distance from the true mean to the convex hull of `6 d n` draws, tested
/// against `2M/n` (centered laws) or `4M / floor(N/(6d))` (otherwise).
pub fn verify_hull_approx(law: &BoundedVectorLaw, n: usize, trials: usize, seed: u64) -> Result<TheoryTrialReport> {
    law.validate()?;
    if n == 0 {
        return Err(invalid("block parameter n must be at least 1"));
    }
    if trials < MIN_TRIALS {
        return Err(Error::TooFewTrials(trials, MIN_TRIALS));
    }
    let d = law.dim();
    let samples = 6 * d * n;
    let bound = law.bound();
    let threshold = if law.is_centered() {
        2.0 * bound / n as f64
    } else {
        4.0 * bound / (samples / (6 * d)) as f64
    };
    let mean = law.mean();
    let outcomes: Vec<Result<bool>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let mut pts = PointSet::with_capacity(d, samples);
            let mut buf = Vec::with_capacity(d);
            for _ in 0..samples {
                law.sample(&mut rng, &mut buf);
                pts.push(&buf);
            }
            let dist = match hull_distance(&pts, &mean, HULL_GAP_TOLERANCE) {
                Ok((dist, _)) => dist,
                Err(Error::BudgetExceeded { best, .. } | Error::Stalled { best, .. }) => {
                    best.objective.max(0.0).sqrt()
                }
                Err(e) => return Err(e),
            };
            Ok(dist <= threshold)
        })
        .collect();
    let mut successes = 0;
    for o in outcomes {
        if o? {
            successes += 1;
        }
    }
    let guaranteed = 1.0 - 0.5_f64.powi(d as i32);
    Ok(TheoryTrialReport::new(trials, successes, guaranteed, threshold, samples))
}

/// Exact distance from `target` to the convex hull of scalars: zero inside
/// `[min, max]`, else the gap to the nearer endpoint.
pub fn hull_distance_1d(values: &[f64], target: f64) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if target < lo {
        lo - target
    } else if target > hi {
        target - hi
    } else {
        0.0
    }
}

/// `E_N(d) = 2 sqrt(sum_{j>d} sigma_j) + 4 kappa / floor(N / (6(d+1)))`.
pub fn theoretical_wce_bound(spectrum: &SpectralProfile, kappa: f64, n: usize, d: usize) -> Result<f64> {
    let blocks = n / (6 * (d + 1));
    if blocks == 0 {
        return Err(Error::InfeasibleTruncation { n, d });
    }
    let tail = spectrum.tail_sum(d)?;
    Ok(2.0 * tail.sqrt() + 4.0 * kappa / blocks as f64)
}

/// `min_d E_N(d)` over admissible `d`, with the minimizing `d`.
pub fn wce_bound_envelope(spectrum: &SpectralProfile, kappa: f64, n: usize) -> Result<(usize, f64)> {
    if n < 6 {
        return Err(Error::InfeasibleTruncation { n, d: 0 });
    }
    let d_max = n / 6 - 1;
    let mut best = (0, f64::INFINITY);
    for d in 0..=d_max {
        let v = theoretical_wce_bound(spectrum, kappa, n, d)?;
        if v < best.1 {
            best = (d, v);
        }
    }
    Ok(best)
}
