use std::fs;
use std::path::Path;

use super::{InverseSolution, Slopes};
use crate::dataset::io::{check_header, parse_field};
use crate::error::{Error, Result};
use crate::tsd::SENSOR_COUNT;

pub const READINGS_HEADER: [&str; SENSOR_COUNT + 1] = ["id", "Sn1", "Sn2", "Sn3", "Sn4", "Sn5", "Sn6", "Sn7"];
pub const RESULTS_HEADER: [&str; 5] = ["id", "MR_MPa", "residual", "method", "at_bound"];

/// One row of a readings file.
#[derive(Debug, Clone, PartialEq)]
pub struct Reading {
    pub id: String,
    /// Corrected Sn1..Sn7, µm/m.
    pub slopes: Slopes,
}

/// Reads `id,Sn1,…,Sn7`; lines starting with `#` are ignored.
pub fn read_readings(path: impl AsRef<Path>) -> Result<Vec<Reading>> {
    let text = fs::read_to_string(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::invalid("readings", "file is empty"));
    }
    check_header(&header, &READINGS_HEADER)?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let mut slopes = [0.0; SENSOR_COUNT];
        for (k, s) in slopes.iter_mut().enumerate() {
            *s = parse_field(&record, i + 1, k + 1, READINGS_HEADER[k + 1])?;
        }
        out.push(Reading {
            id: record[0].to_string(),
            slopes,
        });
    }
    if out.is_empty() {
        return Err(Error::invalid("readings", "file contains no readings"));
    }
    Ok(out)
}

/// Writes `id,MR_MPa,residual,method,at_bound`.
pub fn write_results(path: impl AsRef<Path>, results: &[(String, InverseSolution)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RESULTS_HEADER)?;
    for (id, s) in results {
        w.write_record([
            id.clone(),
            s.modulus_mpa.to_string(),
            s.residual_norm.to_string(),
            s.method.as_str().to_string(),
            s.at_bound.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
