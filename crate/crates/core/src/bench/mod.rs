//! Benchmark driver: configuration, seeded runs, CSV records and summaries.

pub mod config;
pub mod record;
pub mod run;
pub mod summary;

pub use config::{BenchConfig, BenchmarkId, FwBudget, FwStep, Setting};
pub use record::{read_records, write_records, BenchRecord, RecordWriter, RowError, CSV_HEADER};
pub use run::{run_benchmark, run_benchmark_with, run_theory, setting_oracle, support_csv_path, trial_seed};
pub use summary::{summarize, summarize_csv, write_summary, SummaryReport, SummaryRow};
