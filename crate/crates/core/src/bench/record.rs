//! Per-run CSV records.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 12] =
    ["benchmark", "method", "N", "trial", "seed", "wce", "elapsed_ms", "T", "step_rule", "R", "gap", "status"];

pub const STATUS_OK: &str = "ok";
pub const STATUS_BUDGET_EXCEEDED: &str = "budget_exceeded";
pub const STATUS_STALLED: &str = "stalled";
pub const STATUS_ANALYTIC: &str = "analytic";
pub const STATUS_PASS: &str = "pass";
pub const STATUS_FAIL: &str = "fail";

/// One CSV row. Optional fields serialize as empty cells; floats use the
/// shortest representation that round-trips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub benchmark: String,
    pub method: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub wce: f64,
    pub elapsed_ms: f64,
    #[serde(rename = "T")]
    pub t: Option<usize>,
    pub step_rule: Option<String>,
    #[serde(rename = "R")]
    pub r: Option<usize>,
    pub gap: Option<f64>,
    pub status: String,
}

/// Streams records to any writer, header first.
pub struct RecordWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> RecordWriter<W> {
    pub fn new(writer: W) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        inner.write_record(CSV_HEADER)?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, record: &BenchRecord) -> Result<()> {
        self.inner.serialize(record)?;
        Ok(())
    }

    pub fn write_all<'a>(&mut self, records: impl IntoIterator<Item = &'a BenchRecord>) -> Result<()> {
        for r in records {
            self.write(r)?;
        }
        self.flush()
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

pub fn write_records<W: Write>(writer: W, records: &[BenchRecord]) -> Result<()> {
    RecordWriter::new(writer)?.write_all(records)
}

/// A row that could not be parsed; `row` counts file lines from 1 (the header).
#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    pub row: usize,
    pub message: String,
}

impl From<RowError> for Error {
    fn from(e: RowError) -> Self {
        Error::MalformedRow { row: e.row, message: e.message }
    }
}

/// Parses records, collecting malformed rows instead of stopping at them.
/// An empty input yields no records; a wrong header is an error.
pub fn read_records<R: Read>(reader: R) -> Result<(Vec<BenchRecord>, Vec<RowError>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::MalformedRow {
            row: 1,
            message: format!("expected header '{}'", CSV_HEADER.join(",")),
        });
    }
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let fallback_line = i + 2;
        match row {
            Ok(raw) => {
                let line = raw.position().map_or(fallback_line, |p| p.line() as usize);
                match raw.deserialize::<BenchRecord>(Some(&header)) {
                    Ok(r) => records.push(r),
                    Err(e) => errors.push(RowError { row: line, message: e.to_string() }),
                }
            }
            Err(e) => {
                let line = e.position().map_or(fallback_line, |p| p.line() as usize);
                errors.push(RowError { row: line, message: e.to_string() });
            }
        }
    }
    Ok((records, errors))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> BenchRecord {
        BenchRecord {
            benchmark: "sobolev_1_1".into(),
            method: "fw".into(),
            n: 16,
            trial: 3,
            seed: u64::MAX,
            wce: 0.1 + 0.2,
            elapsed_ms: 1.5,
            t: Some(256),
            step_rule: Some("fixed".into()),
            r: None,
            gap: None,
            status: STATUS_OK.into(),
        }
    }

    #[test]
    fn header_and_empty_cells() {
        let mut buf = Vec::new();
        write_records(&mut buf, &[sample()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "benchmark,method,N,trial,seed,wce,elapsed_ms,T,step_rule,R,gap,status");
        assert_eq!(
            lines.next().unwrap(),
            "sobolev_1_1,fw,16,3,18446744073709551615,0.30000000000000004,1.5,256,fixed,,,ok"
        );
    }

    #[test]
    fn round_trip_is_exact() {
        let mut rows = vec![sample()];
        let mut b = sample();
        b.wce = 1e-300;
        b.gap = Some(f64::MIN_POSITIVE);
        b.step_rule = None;
        rows.push(b);
        let mut buf = Vec::new();
        write_records(&mut buf, &rows).unwrap();
        let (back, errs) = read_records(buf.as_slice()).unwrap();
        assert!(errs.is_empty());
        assert_eq!(back, rows);
    }

    #[test]
    fn malformed_rows_are_numbered() {
        let text = format!(
            "{}\nsobolev_1_1,mc,4,0,1,0.5,1,,,,,ok\nsobolev_1_1,mc,x,0,1,0.5,1,,,,,ok\n",
            CSV_HEADER.join(",")
        );
        let (ok, errs) = read_records(text.as_bytes()).unwrap();
        assert_eq!(ok.len(), 1);
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].row, 3);
    }

    #[test]
    fn empty_input() {
        let (ok, errs) = read_records(&b""[..]).unwrap();
        assert!(ok.is_empty() && errs.is_empty());
    }
}
