//! Passenger-count CSV: a header line, then `"<YYYY-MM>",<count>` rows.
//! Blank lines are skipped.

use std::fs;
use std::path::Path;

use memlstm_core::TimeSeries;

use crate::error::{Error, Result};

/// The 144 monthly totals (thousands of passengers, 1949-01 to 1960-12).
pub const AIRLINE_CSV: &str = include_str!("../data/airline-passengers.csv");

pub fn airline() -> TimeSeries {
    parse_series(AIRLINE_CSV, "airline-passengers.csv").expect("bundled dataset parses")
}

pub fn load_series(path: &Path) -> Result<TimeSeries> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_series(&text, &path.display().to_string())
}

pub fn parse_series(text: &str, name: &str) -> Result<TimeSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(name, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        if record.len() != 2 {
            return Err(Error::parse(
                name,
                line,
                format!("expected 2 fields, found {}", record.len()),
            ));
        }
        let raw = record[1].trim();
        let value: f64 = raw
            .parse()
            .map_err(|_| Error::parse(name, line, format!("not a number: {raw:?}")))?;
        if !value.is_finite() {
            return Err(Error::parse(name, line, format!("not finite: {raw:?}")));
        }
        labels.push(record[0].trim().to_string());
        values.push(value);
    }
    if values.is_empty() {
        return Err(Error::parse(name, 1, "no data rows"));
    }
    Ok(TimeSeries::with_labels(values, labels)?)
}
