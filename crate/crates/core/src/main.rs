//! `poskq` command-line driver.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime failure.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use poskq::bench::{
    run_benchmark_with, summarize_csv, write_summary, BenchConfig, BenchmarkId, FwBudget, FwStep, RecordWriter,
    Setting,
};
use poskq::bench::record::{STATUS_BUDGET_EXCEEDED, STATUS_FAIL, STATUS_STALLED};
use poskq::Error;

#[derive(Debug, Parser)]
#[command(name = "poskq", version, about = "Positive-weight kernel quadrature on a fixed candidate pool")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a benchmark and write one CSV row per (N, trial, method).
    Bench {
        /// sobolev_1_1, sobolev_1_3, sobolev_2_5, empirical_rbf, ablate_fw,
        /// ablate_herding or verify_theory.
        benchmark: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Monte Carlo checks of the one-sided and hull approximation lemmas.
    Theory {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Aggregate a results CSV per (benchmark, method, N).
    Summarize {
        csv: PathBuf,
        /// Write the summary here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Every config field, settable from the command line; flags win over the
/// config file.
#[derive(Debug, Args)]
struct Overrides {
    /// Flat JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated pool sizes, e.g. 4,8,16.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<usize>>,
    /// n, n15 or n2.
    #[arg(long)]
    fw_budget: Option<String>,
    /// fixed or linesearch.
    #[arg(long)]
    fw_step: Option<String>,
    #[arg(long)]
    herding_r: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    herding_r_grid: Option<Vec<usize>>,
    #[arg(long)]
    empirical_m: Option<usize>,
    /// Comma-separated settings for the ablations.
    #[arg(long, value_delimiter = ',')]
    settings: Option<Vec<String>>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    full_support_pool: bool,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Overrides {
    fn resolve(self, benchmark: BenchmarkId) -> poskq::Result<BenchConfig> {
        let mut cfg = match &self.config {
            Some(path) => BenchConfig::from_json_file(path)?,
            None => BenchConfig::default(),
        };
        cfg.benchmark = benchmark;
        if self.trials.is_some() {
            cfg.trials = self.trials;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if self.grid.is_some() {
            cfg.grid = self.grid;
        }
        if let Some(v) = self.fw_budget {
            cfg.fw_budget = v.parse::<FwBudget>()?;
        }
        if let Some(v) = self.fw_step {
            cfg.fw_step = v.parse::<FwStep>()?;
        }
        if let Some(v) = self.herding_r {
            cfg.herding_r = v;
        }
        if let Some(v) = self.herding_r_grid {
            cfg.herding_r_grid = v;
        }
        if let Some(v) = self.empirical_m {
            cfg.empirical_m = v;
        }
        if let Some(v) = self.settings {
            cfg.settings = Some(v.iter().map(|s| s.parse::<Setting>()).collect::<poskq::Result<_>>()?);
        }
        if let Some(v) = self.jobs {
            cfg.jobs = v;
        }
        if self.full_support_pool {
            cfg.full_support_pool = true;
        }
        if self.out.is_some() {
            cfg.out = self.out;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::TooFewTrials(..) => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write + Send>, Failure> {
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(io::stdout())),
    }
}

fn bench(benchmark: BenchmarkId, overrides: Overrides) -> Result<(), Failure> {
    let cfg = overrides.resolve(benchmark)?;
    let mut sink = RecordWriter::new(output(cfg.out.as_ref())?)?;
    let rows = run_benchmark_with(&cfg, Some(&mut sink))?;
    sink.flush()?;
    let count = |status: &str| rows.iter().filter(|r| r.status == status).count();
    let failing = count(STATUS_FAIL);
    let unconverged = count(STATUS_BUDGET_EXCEEDED);
    if unconverged > 0 {
        eprintln!("warning: {unconverged} CQP solve(s) hit the iteration budget; best iterates recorded");
    }
    let stalled = count(STATUS_STALLED);
    if stalled > 0 {
        eprintln!("note: {stalled} CQP solve(s) stopped at floating-point resolution above the gap tolerance");
    }
    if failing > 0 {
        eprintln!("warning: {failing} theory check(s) fell short of the guaranteed probability");
    }
    Ok(())
}

fn summarize(csv: PathBuf, out: Option<PathBuf>) -> Result<(), Failure> {
    let report = summarize_csv(&csv).map_err(|e| Failure::Runtime(format!("{}: {e}", csv.display())))?;
    for bad in &report.malformed {
        eprintln!("warning: {} row {}: {}", csv.display(), bad.row, bad.message);
    }
    if report.rows.is_empty() {
        eprintln!("warning: {} contains no records", csv.display());
    }
    let excluded = report.excluded_total();
    if excluded > 0 {
        eprintln!("note: {excluded} row(s) with non-positive wce excluded from log statistics");
    }
    write_summary(output(out.as_ref())?, &report.rows)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Bench { benchmark, overrides } => match benchmark.parse::<BenchmarkId>() {
            Ok(id) => bench(id, overrides),
            Err(e) => Err(e.into()),
        },
        Command::Theory { overrides } => bench(BenchmarkId::VerifyTheory, overrides),
        Command::Summarize { csv, out } => summarize(csv, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
