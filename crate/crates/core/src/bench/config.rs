//! Benchmark configuration: a flat JSON document whose every field can also
//! be set from the command line.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::StepRule;

/// One of the four experimental settings: a kernel/target pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Setting {
    #[serde(rename = "sobolev_1_1")]
    Sobolev11,
    #[serde(rename = "sobolev_1_3")]
    Sobolev13,
    #[serde(rename = "sobolev_2_5")]
    Sobolev25,
    #[serde(rename = "empirical_rbf")]
    EmpiricalRbf,
}

impl Setting {
    pub const ALL: [Setting; 4] = [Self::Sobolev11, Self::Sobolev13, Self::Sobolev25, Self::EmpiricalRbf];
    pub const SOBOLEV: [Setting; 3] = [Self::Sobolev11, Self::Sobolev13, Self::Sobolev25];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Sobolev11 => "sobolev_1_1",
            Self::Sobolev13 => "sobolev_1_3",
            Self::Sobolev25 => "sobolev_2_5",
            Self::EmpiricalRbf => "empirical_rbf",
        }
    }

    /// `(dimension, smoothness)` for the Sobolev settings.
    pub fn sobolev_params(&self) -> Option<(usize, u32)> {
        match self {
            Self::Sobolev11 => Some((1, 1)),
            Self::Sobolev13 => Some((1, 3)),
            Self::Sobolev25 => Some((2, 5)),
            Self::EmpiricalRbf => None,
        }
    }

    pub fn default_grid(&self) -> Vec<usize> {
        match self {
            Self::EmpiricalRbf => vec![4, 8, 16, 32, 64, 128, 256],
            _ => vec![4, 8, 16, 32, 64, 128],
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Setting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown setting '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BenchmarkId {
    #[serde(rename = "sobolev_1_1")]
    Sobolev11,
    #[serde(rename = "sobolev_1_3")]
    Sobolev13,
    #[serde(rename = "sobolev_2_5")]
    Sobolev25,
    #[serde(rename = "empirical_rbf")]
    EmpiricalRbf,
    #[serde(rename = "ablate_fw")]
    AblateFw,
    #[serde(rename = "ablate_herding")]
    AblateHerding,
    #[serde(rename = "verify_theory")]
    VerifyTheory,
}

impl BenchmarkId {
    pub const ALL: [BenchmarkId; 7] = [
        Self::Sobolev11,
        Self::Sobolev13,
        Self::Sobolev25,
        Self::EmpiricalRbf,
        Self::AblateFw,
        Self::AblateHerding,
        Self::VerifyTheory,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Sobolev11 => "sobolev_1_1",
            Self::Sobolev13 => "sobolev_1_3",
            Self::Sobolev25 => "sobolev_2_5",
            Self::EmpiricalRbf => "empirical_rbf",
            Self::AblateFw => "ablate_fw",
            Self::AblateHerding => "ablate_herding",
            Self::VerifyTheory => "verify_theory",
        }
    }

    /// The setting of a single-setting benchmark.
    pub fn setting(&self) -> Option<Setting> {
        match self {
            Self::Sobolev11 => Some(Setting::Sobolev11),
            Self::Sobolev13 => Some(Setting::Sobolev13),
            Self::Sobolev25 => Some(Setting::Sobolev25),
            Self::EmpiricalRbf => Some(Setting::EmpiricalRbf),
            _ => None,
        }
    }
}

impl From<Setting> for BenchmarkId {
    fn from(setting: Setting) -> Self {
        match setting {
            Setting::Sobolev11 => Self::Sobolev11,
            Setting::Sobolev13 => Self::Sobolev13,
            Setting::Sobolev25 => Self::Sobolev25,
            Setting::EmpiricalRbf => Self::EmpiricalRbf,
        }
    }
}

impl fmt::Display for BenchmarkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchmarkId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|x| x.as_str() == s).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|b| b.as_str()).collect();
            Error::Config(format!("unknown benchmark '{s}' (expected one of {})", names.join(", ")))
        })
    }
}

/// Frank-Wolfe iteration budget as a function of the pool size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FwBudget {
    #[serde(rename = "n")]
    Linear,
    #[serde(rename = "n15")]
    ThreeHalves,
    #[serde(rename = "n2")]
    Quadratic,
}

impl FwBudget {
    pub const ALL: [FwBudget; 3] = [Self::Linear, Self::ThreeHalves, Self::Quadratic];

    pub fn iterations(&self, n: usize) -> usize {
        match self {
            Self::Linear => n,
            Self::ThreeHalves => (n as f64).powf(1.5).round() as usize,
            Self::Quadratic => n * n,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Linear => "n",
            Self::ThreeHalves => "n15",
            Self::Quadratic => "n2",
        }
    }
}

impl FromStr for FwBudget {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown FW budget '{s}' (expected n, n15 or n2)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FwStep {
    Fixed,
    Linesearch,
}

impl From<FwStep> for StepRule {
    fn from(s: FwStep) -> Self {
        match s {
            FwStep::Fixed => StepRule::Fixed,
            FwStep::Linesearch => StepRule::LineSearch,
        }
    }
}

impl FromStr for FwStep {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(Self::Fixed),
            "linesearch" => Ok(Self::Linesearch),
            _ => Err(Error::Config(format!("unknown FW step rule '{s}' (expected fixed or linesearch)"))),
        }
    }
}

pub const DEFAULT_TRIALS: usize = 20;
pub const DEFAULT_HERDING_R: usize = 4096;
pub const DEFAULT_HERDING_R_GRID: [usize; 3] = [1024, 4096, 16384];
pub const DEFAULT_EMPIRICAL_M: usize = 10_000;
pub const DEFAULT_ONE_SIDED_TRIALS: usize = 100_000;
pub const DEFAULT_HULL_TRIALS: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub benchmark: BenchmarkId,
    /// Pool sizes; `None` uses each setting's default grid.
    pub grid: Option<Vec<usize>>,
    /// Trials per pool size (theory: trials per check). `None` uses defaults.
    pub trials: Option<usize>,
    pub seed: u64,
    pub fw_budget: FwBudget,
    pub fw_step: FwStep,
    pub herding_r: usize,
    /// Candidate sizes compared by `ablate_herding`.
    pub herding_r_grid: Vec<usize>,
    pub empirical_m: usize,
    /// Settings covered by the ablations; `None` uses all applicable ones.
    pub settings: Option<Vec<Setting>>,
    /// Worker threads for trials; 0 uses all cores.
    pub jobs: usize,
    /// Use the whole empirical support as the pool (needs grid = [M]).
    pub full_support_pool: bool,
    pub out: Option<PathBuf>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            benchmark: BenchmarkId::Sobolev11,
            grid: None,
            trials: None,
            seed: 0,
            fw_budget: FwBudget::Quadratic,
            fw_step: FwStep::Fixed,
            herding_r: DEFAULT_HERDING_R,
            herding_r_grid: DEFAULT_HERDING_R_GRID.to_vec(),
            empirical_m: DEFAULT_EMPIRICAL_M,
            settings: None,
            jobs: 0,
            full_support_pool: false,
            out: None,
        }
    }
}

impl BenchConfig {
    pub fn new(benchmark: BenchmarkId) -> Self {
        Self { benchmark, ..Self::default() }
    }

    /// Parses a JSON config; errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column())))
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn grid_for(&self, setting: Setting) -> Vec<usize> {
        self.grid.clone().unwrap_or_else(|| setting.default_grid())
    }

    pub fn trials_per_point(&self) -> usize {
        self.trials.unwrap_or(DEFAULT_TRIALS)
    }

    pub fn settings_for_run(&self) -> Vec<Setting> {
        if let Some(s) = self.benchmark.setting() {
            return vec![s];
        }
        match (&self.settings, self.benchmark) {
            (Some(s), _) => s.clone(),
            (None, BenchmarkId::AblateHerding) => Setting::SOBOLEV.to_vec(),
            (None, BenchmarkId::AblateFw) => Setting::ALL.to_vec(),
            (None, _) => Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if let Some(grid) = &self.grid {
            if grid.is_empty() {
                return cfg("grid must not be empty".into());
            }
            if grid.contains(&0) {
                return cfg("grid entries must be positive".into());
            }
        }
        if self.trials == Some(0) {
            return cfg("trials must be positive".into());
        }
        if self.herding_r == 0 {
            return cfg("herding_r must be positive".into());
        }
        if self.herding_r_grid.is_empty() || self.herding_r_grid.contains(&0) {
            return cfg("herding_r_grid entries must be positive".into());
        }
        if self.empirical_m == 0 {
            return cfg("empirical_m must be positive".into());
        }
        if self.benchmark == BenchmarkId::AblateHerding
            && self.settings_for_run().contains(&Setting::EmpiricalRbf)
        {
            return cfg("ablate_herding covers the Sobolev settings only".into());
        }
        if self.full_support_pool {
            if !self.settings_for_run().contains(&Setting::EmpiricalRbf) {
                return cfg("full_support_pool applies to empirical_rbf only".into());
            }
            if self.grid.as_deref() != Some(&[self.empirical_m][..]) {
                return cfg(format!("full_support_pool needs grid = [{}] (the support size)", self.empirical_m));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_json() {
        let c = BenchConfig::from_json(
            r#"{"benchmark": "empirical_rbf", "grid": [4, 8], "trials": 3, "seed": 9,
                "fw_budget": "n15", "fw_step": "linesearch", "out": "x.csv"}"#,
        )
        .unwrap();
        assert_eq!(c.benchmark, BenchmarkId::EmpiricalRbf);
        assert_eq!(c.grid_for(Setting::EmpiricalRbf), vec![4, 8]);
        assert_eq!(c.fw_budget, FwBudget::ThreeHalves);
        assert_eq!(c.fw_step, FwStep::Linesearch);
        assert_eq!(c.herding_r, 4096);
    }

    #[test]
    fn errors_name_the_line() {
        let err = BenchConfig::from_json("{\n  \"trials\": 3,\n  \"bogus\": 1\n}").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let err = BenchConfig::from_json("{\"fw_budget\": \"n3\"}").unwrap_err();
        assert!(err.to_string().contains("line 1"));
    }

    #[test]
    fn default_grids() {
        let c = BenchConfig::new(BenchmarkId::Sobolev11);
        assert_eq!(c.grid_for(Setting::Sobolev11), vec![4, 8, 16, 32, 64, 128]);
        assert_eq!(c.grid_for(Setting::EmpiricalRbf).last(), Some(&256));
        assert_eq!(c.trials_per_point(), 20);
    }

    #[test]
    fn budgets() {
        assert_eq!(FwBudget::Linear.iterations(16), 16);
        assert_eq!(FwBudget::ThreeHalves.iterations(16), 64);
        assert_eq!(FwBudget::Quadratic.iterations(16), 256);
    }

    #[test]
    fn validation() {
        let mut c = BenchConfig::new(BenchmarkId::Sobolev11);
        c.trials = Some(0);
        assert!(c.validate().is_err());
        let mut c = BenchConfig::new(BenchmarkId::EmpiricalRbf);
        c.full_support_pool = true;
        assert!(c.validate().is_err());
        c.grid = Some(vec![c.empirical_m]);
        assert!(c.validate().is_ok());
        let mut c = BenchConfig::new(BenchmarkId::AblateHerding);
        assert_eq!(c.settings_for_run().len(), 3);
        c.settings = Some(vec![Setting::EmpiricalRbf]);
        assert!(c.validate().is_err());
    }

    #[test]
    fn ids_round_trip() {
        for b in BenchmarkId::ALL {
            assert_eq!(b.as_str().parse::<BenchmarkId>().unwrap(), b);
        }
        assert!("sobolev_9_9".parse::<BenchmarkId>().is_err());
    }
}
