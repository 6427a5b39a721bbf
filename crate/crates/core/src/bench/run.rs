//! Seeded execution of the benchmark suites.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{BenchConfig, BenchmarkId, FwBudget, FwStep, Setting};
use super::record::{
    BenchRecord, RecordWriter, STATUS_ANALYTIC, STATUS_FAIL, STATUS_OK, STATUS_PASS,
};
use crate::error::{Error, Result};
use crate::kernel::{KernelSpec, DEFAULT_MEDIAN_MAX_PAIRS};
use crate::numeric::{label, split_seed};
use crate::quadrature::{
    cqp_best_effort, cqp_quadrature, fw_quadrature, herding_quadrature, monte_carlo_weights, wce, CandidateMode,
    StepRule,
};
use crate::target::{build_oracle, MixtureParams, TargetOracle, TargetSpec};
use crate::theory::{verify_hull_approx, verify_one_sided, wce_bound_envelope, BoundedVectorLaw, TheoryTrialReport};

pub const ROLE_POOL: &str = "pool";
pub const ROLE_SUPPORT: &str = "support";
pub const ROLE_HERDING: &str = "herding-candidates";
pub const ROLE_THEORY: &str = "theory";

/// Seed of one random role within one `(setting, N, trial)` cell.
pub fn trial_seed(base: u64, setting: Setting, n: usize, trial: usize, role: &str) -> u64 {
    split_seed(base, &[label(setting.as_str()), n as u64, trial as u64, label(role)])
}

/// Seed of the empirical support; fixed per setting so every pool size and
/// trial draws from the same target.
pub fn support_seed(base: u64, setting: Setting) -> u64 {
    split_seed(base, &[label(setting.as_str()), label(ROLE_SUPPORT)])
}

/// Target oracle of a setting under `cfg`.
pub fn setting_oracle(cfg: &BenchConfig, setting: Setting) -> Result<TargetOracle> {
    let spec = match setting.sobolev_params() {
        Some((p, s)) => TargetSpec::uniform_torus(KernelSpec::periodic_sobolev(p, s)?)?,
        None => TargetSpec::empirical_mixture(MixtureParams { support_size: cfg.empirical_m, ..Default::default() })?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(support_seed(cfg.seed, setting));
    build_oracle(&spec, &mut rng)
}

/// Where the empirical support of `setting` is dumped next to `out`.
pub fn support_csv_path(out: &Path, setting: Setting) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}_{}_support.csv", setting.as_str()))
}

/// Where the metadata of the empirical support (lengthscale and the
/// median-heuristic pair cap) is written next to `out`.
pub fn support_metadata_path(out: &Path, setting: Setting) -> PathBuf {
    support_csv_path(out, setting).with_extension("json")
}

#[derive(Debug, Serialize)]
struct SupportMetadata<'a> {
    setting: &'a str,
    support_size: usize,
    support_seed: u64,
    lengthscale: f64,
    median_max_pairs: usize,
    median_pairs_used: usize,
}

fn write_support_files(cfg: &BenchConfig, setting: Setting, oracle: &TargetOracle, out: &Path) -> Result<()> {
    let (Some(support), Some(lengthscale)) = (oracle.support(), oracle.lengthscale()) else {
        return Ok(());
    };
    oracle.write_support_csv(&support_csv_path(out, setting))?;
    let m = support.len();
    let meta = SupportMetadata {
        setting: setting.as_str(),
        support_size: m,
        support_seed: support_seed(cfg.seed, setting),
        lengthscale,
        median_max_pairs: DEFAULT_MEDIAN_MAX_PAIRS,
        median_pairs_used: (m * m.saturating_sub(1) / 2).min(DEFAULT_MEDIAN_MAX_PAIRS),
    };
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(support_metadata_path(out, setting), text + "\n")?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
enum MethodSpec {
    MonteCarlo,
    Cqp,
    FrankWolfe { budget: FwBudget, step: FwStep, label: String },
    Herding { candidates: usize, label: String },
}

fn step_label(step: FwStep) -> &'static str {
    StepRule::from(step).as_str()
}

fn method_plan(cfg: &BenchConfig) -> Vec<MethodSpec> {
    let mut plan = vec![MethodSpec::MonteCarlo, MethodSpec::Cqp];
    match cfg.benchmark {
        BenchmarkId::AblateFw => {
            for step in [FwStep::Fixed, FwStep::Linesearch] {
                for budget in FwBudget::ALL {
                    let label = format!("fw_{}_{}", step_label(step), budget.as_str());
                    plan.push(MethodSpec::FrankWolfe { budget, step, label });
                }
            }
        }
        BenchmarkId::AblateHerding => {
            plan.push(MethodSpec::FrankWolfe { budget: cfg.fw_budget, step: cfg.fw_step, label: "fw".into() });
            for &r in &cfg.herding_r_grid {
                plan.push(MethodSpec::Herding { candidates: r, label: format!("herding_r{r}") });
            }
        }
        _ => {
            plan.push(MethodSpec::FrankWolfe { budget: cfg.fw_budget, step: cfg.fw_step, label: "fw".into() });
            plan.push(MethodSpec::Herding { candidates: cfg.herding_r, label: "herding".into() });
        }
    }
    plan
}

struct SettingRun<'a> {
    cfg: &'a BenchConfig,
    setting: Setting,
    oracle: TargetOracle,
    plan: Vec<MethodSpec>,
}

impl SettingRun<'_> {
    fn base_record(&self, method: &str, n: usize, trial: usize, seed: u64) -> BenchRecord {
        BenchRecord {
            benchmark: self.cfg.benchmark.as_str().to_string(),
            method: method.to_string(),
            n,
            trial,
            seed,
            wce: f64::NAN,
            elapsed_ms: 0.0,
            t: None,
            step_rule: None,
            r: None,
            gap: None,
            status: STATUS_OK.to_string(),
        }
    }

    /// All methods on one shared pool. Each elapsed time includes building
    /// the pool problem, which every method needs for its wce.
    fn trial(&self, n: usize, trial: usize) -> Result<Vec<BenchRecord>> {
        let base = self.cfg.seed;
        let pool_seed = trial_seed(base, self.setting, n, trial, ROLE_POOL);
        let pool = if self.cfg.full_support_pool {
            self.oracle.support().expect("validated: empirical setting").clone()
        } else {
            self.oracle.sample_pool(n, &mut ChaCha8Rng::seed_from_u64(pool_seed))
        };
        let start = Instant::now();
        let problem = self.oracle.try_build_pool_problem(&pool)?;
        let prep_ms = ms_since(start);

        let mut out = Vec::with_capacity(self.plan.len());
        for spec in &self.plan {
            let start = Instant::now();
            let mut rec = match spec {
                MethodSpec::MonteCarlo => {
                    let w = monte_carlo_weights(n);
                    let mut r = self.base_record("mc", n, trial, pool_seed);
                    r.wce = wce(&problem, &w)?;
                    r
                }
                MethodSpec::Cqp => {
                    let (w, status) = cqp_best_effort(cqp_quadrature(&problem))?;
                    let mut r = self.base_record("cqp", n, trial, pool_seed);
                    r.wce = wce(&problem, &w)?;
                    r.t = w.iterations();
                    r.gap = w.gap();
                    r.status = status.as_str().to_string();
                    r
                }
                MethodSpec::FrankWolfe { budget, step, label } => {
                    let iterations = budget.iterations(n);
                    let w = fw_quadrature(&problem, iterations, (*step).into());
                    let mut r = self.base_record(label, n, trial, pool_seed);
                    r.wce = wce(&problem, &w)?;
                    r.t = Some(iterations);
                    r.step_rule = Some(step_label(*step).to_string());
                    r
                }
                MethodSpec::Herding { candidates, label } => {
                    let seed = trial_seed(base, self.setting, n, trial, ROLE_HERDING);
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let (mode, r_value) = match self.oracle.support() {
                        Some(support) => (CandidateMode::GlobalSupport, support.len()),
                        None => (CandidateMode::Resample { size: *candidates }, *candidates),
                    };
                    let rule = herding_quadrature(&self.oracle, n, mode, &mut rng)?;
                    let mut r = self.base_record(label, n, trial, seed);
                    r.wce = rule.wce(&self.oracle)?;
                    r.r = Some(r_value);
                    r
                }
            };
            // Herding never touches the pool, so it is timed on its own.
            let needs_pool = !matches!(spec, MethodSpec::Herding { .. });
            rec.elapsed_ms = ms_since(start) + if needs_pool { prep_ms } else { 0.0 };
            out.push(rec);
        }
        Ok(out)
    }

    /// Envelope of the theoretical wce bound (one-dimensional Sobolev only).
    fn bound_record(&self, n: usize) -> Result<Option<BenchRecord>> {
        let Some((1, _)) = self.setting.sobolev_params() else {
            return Ok(None);
        };
        let kernel = self.oracle.kernel();
        match wce_bound_envelope(&kernel.spectral_profile()?, kernel.diagonal_bound(), n) {
            Ok((_, value)) => {
                let mut r = self.base_record("bound", n, 0, 0);
                r.wce = value;
                r.status = STATUS_ANALYTIC.to_string();
                Ok(Some(r))
            }
            Err(Error::InfeasibleTruncation { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Runs `cfg`, streaming rows to `sink` (if any) as each pool size finishes,
/// and returns all rows in order: setting, N ascending, trial ascending,
/// fixed method order.
pub fn run_benchmark_with<W: Write + Send>(cfg: &BenchConfig, mut sink: Option<&mut RecordWriter<W>>) -> Result<Vec<BenchRecord>> {
    cfg.validate()?;
    let body = |sink: &mut Option<&mut RecordWriter<W>>| -> Result<Vec<BenchRecord>> {
        if cfg.benchmark == BenchmarkId::VerifyTheory {
            let rows = run_theory(cfg)?;
            if let Some(s) = sink.as_deref_mut() {
                s.write_all(&rows)?;
            }
            return Ok(rows);
        }
        let mut all = Vec::new();
        for setting in cfg.settings_for_run() {
            let oracle = setting_oracle(cfg, setting)?;
            if let Some(out) = &cfg.out {
                write_support_files(cfg, setting, &oracle, out)?;
            }
            let run = SettingRun { cfg, setting, oracle, plan: method_plan(cfg) };
            for n in cfg.grid_for(setting) {
                let per_trial: Vec<Vec<BenchRecord>> = (0..cfg.trials_per_point())
                    .into_par_iter()
                    .map(|trial| run.trial(n, trial))
                    .collect::<Result<_>>()?;
                let mut rows: Vec<BenchRecord> = per_trial.into_iter().flatten().collect();
                if let Some(b) = run.bound_record(n)? {
                    rows.push(b);
                }
                if let Some(s) = sink.as_deref_mut() {
                    s.write_all(&rows)?;
                }
                all.extend(rows);
            }
        }
        Ok(all)
    };
    if cfg.jobs == 0 {
        body(&mut sink)
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {} worker threads: {e}", cfg.jobs)))?;
        pool.install(|| body(&mut sink))
    }
}

pub fn run_benchmark(cfg: &BenchConfig) -> Result<Vec<BenchRecord>> {
    run_benchmark_with::<std::io::Sink>(cfg, None)
}

/// A named Monte Carlo check of the approximation lemmas.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryCheck {
    pub name: &'static str,
    pub law: BoundedVectorLaw,
    pub n: usize,
    pub hull: bool,
    pub trials: usize,
}

pub fn theory_checks(trials: Option<usize>) -> Vec<TheoryCheck> {
    let one = trials.unwrap_or(super::config::DEFAULT_ONE_SIDED_TRIALS);
    let hull = trials.unwrap_or(super::config::DEFAULT_HULL_TRIALS);
    let c = |name, law, n, is_hull: bool| TheoryCheck { name, law, n, hull: is_hull, trials: if is_hull { hull } else { one } };
    vec![
        c("one_sided_rademacher", BoundedVectorLaw::RademacherScalar, 1, false),
        c("one_sided_rademacher", BoundedVectorLaw::RademacherScalar, 4, false),
        c("one_sided_uniform", BoundedVectorLaw::UniformCube { dim: 1 }, 5, false),
        c("one_sided_uniform", BoundedVectorLaw::UniformCube { dim: 1 }, 20, false),
        c("hull_uniform_d1", BoundedVectorLaw::UniformCube { dim: 1 }, 2, true),
        c("hull_sphere_d1", BoundedVectorLaw::UniformSphere { dim: 1 }, 4, true),
        c("hull_sphere_d2", BoundedVectorLaw::UniformSphere { dim: 2 }, 4, true),
        c("hull_sphere_d3", BoundedVectorLaw::UniformSphere { dim: 3 }, 4, true),
        c("hull_shifted_d2", BoundedVectorLaw::ShiftedUniformCube { shift: vec![0.5, -0.25] }, 4, true),
    ]
}

pub fn theory_seed(base: u64, check: &TheoryCheck) -> u64 {
    split_seed(base, &[label(ROLE_THEORY), label(check.name), check.n as u64])
}

pub fn run_theory_check(check: &TheoryCheck, base_seed: u64) -> Result<TheoryTrialReport> {
    let seed = theory_seed(base_seed, check);
    if check.hull {
        verify_hull_approx(&check.law, check.n, check.trials, seed)
    } else {
        verify_one_sided(&check.law, check.n, check.trials, seed)
    }
}

/// Theory rows: `wce` holds the empirical success probability, `gap` the
/// 99% lower confidence bound, `T` the trial count, `R` the successes and
/// `status` whether the bound clears the guaranteed probability.
pub fn run_theory(cfg: &BenchConfig) -> Result<Vec<BenchRecord>> {
    let mut rows = Vec::new();
    for check in theory_checks(cfg.trials) {
        let start = Instant::now();
        let report = run_theory_check(&check, cfg.seed)?;
        rows.push(BenchRecord {
            benchmark: BenchmarkId::VerifyTheory.as_str().to_string(),
            method: check.name.to_string(),
            n: check.n,
            trial: 0,
            seed: theory_seed(cfg.seed, &check),
            wce: report.empirical_probability,
            elapsed_ms: ms_since(start),
            t: Some(report.trials),
            step_rule: None,
            r: Some(report.successes),
            gap: Some(report.lower_confidence_bound),
            status: if report.meets_guarantee() { STATUS_PASS } else { STATUS_FAIL }.to_string(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(bench: BenchmarkId) -> BenchConfig {
        BenchConfig { grid: Some(vec![4, 8]), trials: Some(2), seed: 11, empirical_m: 200, ..BenchConfig::new(bench) }
    }

    #[test]
    fn rows_come_in_fixed_order() {
        let rows = run_benchmark(&small(BenchmarkId::Sobolev11)).unwrap();
        let methods: Vec<&str> = rows.iter().take(4).map(|r| r.method.as_str()).collect();
        assert_eq!(methods, ["mc", "cqp", "fw", "herding"]);
        // 2 sizes x 2 trials x 4 methods, plus the bound row at N = 8
        // (N = 4 admits no truncation level).
        assert_eq!(rows.len(), 17);
        assert_eq!(rows.iter().filter(|r| r.method == "bound").map(|r| r.n).collect::<Vec<_>>(), [8]);
        assert!(rows.windows(2).all(|w| w[0].n <= w[1].n));
        let trials: Vec<(usize, usize)> = rows.iter().filter(|r| r.method != "bound").map(|r| (r.n, r.trial)).collect();
        assert!(trials.windows(2).all(|w| w[0] <= w[1]));
        for r in &rows {
            assert!(r.wce.is_finite() && r.wce >= 0.0);
        }
    }

    #[test]
    fn reruns_are_identical() {
        let cfg = small(BenchmarkId::EmpiricalRbf);
        let a = run_benchmark(&cfg).unwrap();
        let b = run_benchmark(&cfg).unwrap();
        let wa: Vec<u64> = a.iter().map(|r| r.wce.to_bits()).collect();
        let wb: Vec<u64> = b.iter().map(|r| r.wce.to_bits()).collect();
        assert_eq!(wa, wb);
        assert!(a.iter().filter(|r| r.method == "herding").all(|r| r.r == Some(200)));
    }

    #[test]
    fn pool_is_shared_and_cqp_wins() {
        let mut rows = run_benchmark(&small(BenchmarkId::Sobolev13)).unwrap();
        rows.retain(|r| r.method != "bound");
        for chunk in rows.chunks(4) {
            let (mc, cqp, fw) = (&chunk[0], &chunk[1], &chunk[2]);
            assert_eq!(mc.seed, cqp.seed);
            assert!(cqp.wce <= mc.wce.min(fw.wce) + 1e-8);
        }
    }

    #[test]
    fn ablation_labels() {
        let mut cfg = small(BenchmarkId::AblateFw);
        cfg.settings = Some(vec![Setting::Sobolev11]);
        cfg.trials = Some(1);
        cfg.grid = Some(vec![4]);
        let rows = run_benchmark(&cfg).unwrap();
        let labels: Vec<&str> = rows.iter().map(|r| r.method.as_str()).collect();
        assert_eq!(
            labels,
            [
                "mc",
                "cqp",
                "fw_fixed_n",
                "fw_fixed_n15",
                "fw_fixed_n2",
                "fw_linesearch_n",
                "fw_linesearch_n15",
                "fw_linesearch_n2"
            ]
        );
        let mut cfg = small(BenchmarkId::AblateHerding);
        cfg.settings = Some(vec![Setting::Sobolev11]);
        cfg.trials = Some(1);
        cfg.grid = Some(vec![4]);
        cfg.herding_r_grid = vec![16, 64];
        let rows = run_benchmark(&cfg).unwrap();
        let labels: Vec<&str> = rows.iter().map(|r| r.method.as_str()).collect();
        assert_eq!(labels, ["mc", "cqp", "fw", "herding_r16", "herding_r64"]);
    }

    #[test]
    fn bound_rows_for_one_dimensional_sobolev() {
        let mut cfg = small(BenchmarkId::Sobolev11);
        cfg.grid = Some(vec![12]);
        cfg.trials = Some(1);
        let rows = run_benchmark(&cfg).unwrap();
        let bound = rows.last().unwrap();
        assert_eq!(bound.method, "bound");
        assert_eq!(bound.status, STATUS_ANALYTIC);
        assert!(bound.wce > 0.0);
    }

    #[test]
    fn theory_rows_refuse_too_few_trials() {
        let mut cfg = BenchConfig::new(BenchmarkId::VerifyTheory);
        cfg.trials = Some(10);
        assert!(matches!(run_benchmark(&cfg), Err(Error::TooFewTrials(..))));
    }
}
