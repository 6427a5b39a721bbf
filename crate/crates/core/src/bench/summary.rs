//! Aggregation of benchmark records per `(benchmark, method, N)`.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::record::{read_records, BenchRecord, RowError};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub benchmark: String,
    pub method: String,
    #[serde(rename = "N")]
    pub n: usize,
    /// Rows entering the log statistics (positive wce).
    pub count: usize,
    /// Rows with zero or negative wce, left out of the log statistics.
    pub excluded: usize,
    /// Median wce over the included rows; empty when none are included.
    pub median_wce: Option<f64>,
    /// Mean of `ln wce`.
    pub log_mean: Option<f64>,
    /// Sample standard deviation of `ln wce`; 0 for a single row.
    pub log_sd: Option<f64>,
    pub mean_elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SummaryReport {
    pub rows: Vec<SummaryRow>,
    pub malformed: Vec<RowError>,
}

impl SummaryReport {
    pub fn excluded_total(&self) -> usize {
        self.rows.iter().map(|r| r.excluded).sum()
    }
}

/// Groups records in order of first appearance.
pub fn summarize(records: &[BenchRecord]) -> Vec<SummaryRow> {
    let mut order: Vec<(&str, &str, usize)> = Vec::new();
    let mut groups: HashMap<(&str, &str, usize), Vec<&BenchRecord>> = HashMap::new();
    for r in records {
        let key = (r.benchmark.as_str(), r.method.as_str(), r.n);
        groups
            .entry(key)
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r);
    }
    order.into_iter().map(|key| summarize_group(key, &groups[&key])).collect()
}

fn summarize_group((benchmark, method, n): (&str, &str, usize), rows: &[&BenchRecord]) -> SummaryRow {
    let mut positive: Vec<f64> = rows.iter().map(|r| r.wce).filter(|w| *w > 0.0).collect();
    let excluded = rows.len() - positive.len();
    let mean_elapsed_ms = rows.iter().map(|r| r.elapsed_ms).sum::<f64>() / rows.len() as f64;
    let (median_wce, log_mean, log_sd) = if positive.is_empty() {
        (None, None, None)
    } else {
        positive.sort_by(f64::total_cmp);
        let k = positive.len();
        let median = if k % 2 == 1 { positive[k / 2] } else { 0.5 * (positive[k / 2 - 1] + positive[k / 2]) };
        let logs: Vec<f64> = positive.iter().map(|w| w.ln()).collect();
        let mean = logs.iter().sum::<f64>() / k as f64;
        let sd = if k > 1 {
            (logs.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (k - 1) as f64).sqrt()
        } else {
            0.0
        };
        (Some(median), Some(mean), Some(sd))
    };
    SummaryRow {
        benchmark: benchmark.to_string(),
        method: method.to_string(),
        n,
        count: positive.len(),
        excluded,
        median_wce,
        log_mean,
        log_sd,
        mean_elapsed_ms,
    }
}

pub fn summarize_csv(path: &Path) -> Result<SummaryReport> {
    let file = std::fs::File::open(path)?;
    let (records, malformed) = read_records(std::io::BufReader::new(file))?;
    Ok(SummaryReport { rows: summarize(&records), malformed })
}

pub fn write_summary<W: Write>(writer: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    if rows.is_empty() {
        w.write_record([
            "benchmark", "method", "N", "count", "excluded", "median_wce", "log_mean", "log_sd", "mean_elapsed_ms",
        ])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
