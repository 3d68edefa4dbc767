//! CSV files: a `# key=value` manifest block, a header row, then data.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! write/read cycle reproduces every value bit for bit.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::{DeflectionMatrix, Manifest, MonotonicityViolation, SlopeDatabase, SlopeRow};
use crate::error::{Error, Result};
use crate::tsd::SENSOR_COUNT;

pub const SLOPE_HEADER: [&str; SENSOR_COUNT + 2] = ["MR_MPa", "Sn1", "Sn2", "Sn3", "Sn4", "Sn5", "Sn6", "Sn7", "Sn8_raw"];

fn split_manifest(text: &str) -> (BTreeMap<String, String>, &str) {
    let mut manifest = BTreeMap::new();
    let mut rest = text;
    while let Some(line) = rest.lines().next() {
        let Some(body) = line.strip_prefix('#') else { break };
        if let Some((k, v)) = body.trim().split_once('=') {
            manifest.insert(k.trim().to_string(), v.trim().to_string());
        }
        rest = rest[line.len()..].trim_start_matches(['\r', '\n']);
    }
    (manifest, rest)
}

fn manifest_value<'a>(m: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str> {
    m.get(key)
        .map(String::as_str)
        .ok_or_else(|| Error::Schema(format!("manifest is missing '{key}'")))
}

fn parse_manifest_num<T: std::str::FromStr>(m: &BTreeMap<String, String>, key: &str) -> Result<T> {
    let v = manifest_value(m, key)?;
    v.parse()
        .map_err(|_| Error::Schema(format!("manifest '{key}' has unparsable value '{v}'")))
}

fn format_violations(v: &[MonotonicityViolation]) -> String {
    v.iter()
        .map(|x| format!("{}@{}", x.column, x.modulus_mpa))
        .collect::<Vec<_>>()
        .join(";")
}

fn parse_violations(s: &str) -> Result<Vec<MonotonicityViolation>> {
    s.split(';')
        .filter(|p| !p.is_empty())
        .map(|p| {
            let (column, m) = p
                .split_once('@')
                .ok_or_else(|| Error::Schema(format!("bad non_monotone entry '{p}'")))?;
            let modulus_mpa = m
                .parse()
                .map_err(|_| Error::Schema(format!("bad non_monotone entry '{p}'")))?;
            Ok(MonotonicityViolation {
                column: column.to_string(),
                modulus_mpa,
            })
        })
        .collect()
}

/// Checks a header row against `expected`, naming the first missing or
/// unexpected column.
pub(crate) fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    for name in expected {
        if !found.iter().any(|h| h == *name) {
            return Err(Error::Schema(format!("missing column {name}")));
        }
    }
    for h in found {
        if !expected.contains(&h) {
            return Err(Error::Schema(format!("unexpected column {h}")));
        }
    }
    if found.iter().ne(expected.iter().copied()) {
        return Err(Error::Schema(format!("columns must appear in the order {}", expected.join(","))));
    }
    Ok(())
}

pub(crate) fn parse_field(record: &csv::StringRecord, row: usize, col: usize, name: &str) -> Result<f64> {
    let raw = record.get(col).unwrap_or("");
    raw.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Schema(format!("data row {row}, column {name}: '{raw}' is not a finite number")))
}

pub fn write_database(db: &SlopeDatabase, path: impl AsRef<Path>) -> Result<()> {
    let m = &db.manifest;
    let mut out = Vec::new();
    writeln!(out, "# tool={}", m.tool)?;
    writeln!(out, "# config_hash={}", m.config_hash)?;
    writeln!(out, "# base_structure={}", m.base_structure)?;
    writeln!(out, "# swept_layer={}", m.swept_layer)?;
    writeln!(out, "# quadrature_tol={:e}", m.quadrature_tol)?;
    writeln!(out, "# contact_mode={}", m.contact_mode.as_str())?;
    writeln!(out, "# gravity={}", m.gravity)?;
    writeln!(out, "# non_monotone={}", format_violations(&m.non_monotone))?;
    writeln!(out, "# rows={}", db.rows.len())?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(SLOPE_HEADER)?;
        for r in &db.rows {
            let mut rec = Vec::with_capacity(SENSOR_COUNT + 2);
            rec.push(r.modulus_mpa.to_string());
            rec.extend(r.slopes.iter().map(f64::to_string));
            rec.push(r.sn8_raw.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_database(path: impl AsRef<Path>) -> Result<SlopeDatabase> {
    let text = fs::read_to_string(path)?;
    let (meta, body) = split_manifest(&text);
    let manifest = Manifest {
        tool: manifest_value(&meta, "tool")?.to_string(),
        config_hash: manifest_value(&meta, "config_hash")?.to_string(),
        base_structure: manifest_value(&meta, "base_structure")?.to_string(),
        swept_layer: parse_manifest_num(&meta, "swept_layer")?,
        quadrature_tol: parse_manifest_num(&meta, "quadrature_tol")?,
        contact_mode: manifest_value(&meta, "contact_mode")?.parse()?,
        gravity: parse_manifest_num(&meta, "gravity")?,
        non_monotone: parse_violations(meta.get("non_monotone").map_or("", String::as_str))?,
    };
    let declared: usize = parse_manifest_num(&meta, "rows")?;

    let mut reader = csv::ReaderBuilder::new().from_reader(body.as_bytes());
    check_header(reader.headers()?, &SLOPE_HEADER)?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let mut slopes = [0.0; SENSOR_COUNT];
        for (k, s) in slopes.iter_mut().enumerate() {
            *s = parse_field(&record, row, k + 1, SLOPE_HEADER[k + 1])?;
        }
        rows.push(SlopeRow {
            modulus_mpa: parse_field(&record, row, 0, "MR_MPa")?,
            slopes,
            sn8_raw: parse_field(&record, row, SENSOR_COUNT + 1, "Sn8_raw")?,
        });
    }
    if rows.len() != declared {
        return Err(Error::RowCount {
            expected: declared,
            found: rows.len(),
        });
    }
    if let Some(i) = rows.windows(2).position(|w| !(w[1].modulus_mpa > w[0].modulus_mpa)) {
        return Err(Error::Ordering { row: i + 2 });
    }
    Ok(SlopeDatabase { manifest, rows })
}

pub fn write_matrix(matrix: &DeflectionMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "# tool={}", super::TOOL_VERSION)?;
    writeln!(out, "# units=x_m in m, deflections in um")?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        let mut header = vec!["x_m".to_string()];
        header.extend(matrix.moduli_mpa.iter().map(|&m| DeflectionMatrix::label(m)));
        w.write_record(&header)?;
        for (i, x) in matrix.offsets.iter().enumerate() {
            let mut rec = vec![x.to_string()];
            rec.extend(matrix.columns.iter().map(|c| c[i].to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DeflectionMatrix> {
    let text = fs::read_to_string(path)?;
    let (_, body) = split_manifest(&text);
    let mut reader = csv::ReaderBuilder::new().from_reader(body.as_bytes());
    let header = reader.headers()?.clone();
    if header.get(0) != Some("x_m") {
        return Err(Error::Schema("missing column x_m".into()));
    }
    let moduli_mpa = header
        .iter()
        .skip(1)
        .map(|h| {
            h.strip_prefix('E')
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| Error::Schema(format!("bad modulus column label {h}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut offsets = Vec::new();
    let mut columns = vec![Vec::new(); moduli_mpa.len()];
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        offsets.push(parse_field(&record, i + 1, 0, "x_m")?);
        for (j, col) in columns.iter_mut().enumerate() {
            col.push(parse_field(&record, i + 1, j + 1, &header[j + 1])?);
        }
    }
    Ok(DeflectionMatrix {
        offsets,
        moduli_mpa,
        columns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tsd::ContactMode;

    fn sample_db() -> SlopeDatabase {
        let rows = (0..5)
            .map(|i| SlopeRow {
                modulus_mpa: 16.0 + i as f64,
                slopes: std::array::from_fn(|k| -0.1 * (k as f64 + 1.0) / (i as f64 + 3.0) - 1e-13),
                sn8_raw: -70.84404884963647 / (i as f64 + 1.0),
            })
            .collect();
        SlopeDatabase {
            manifest: Manifest {
                tool: super::super::TOOL_VERSION.into(),
                config_hash: "0123456789abcdef".into(),
                base_structure: "abcdef012345".into(),
                swept_layer: 3,
                quadrature_tol: 1e-8,
                contact_mode: ContactMode::Pressure,
                gravity: 9.81,
                non_monotone: vec![MonotonicityViolation {
                    column: "Sn1".into(),
                    modulus_mpa: 77.0,
                }],
            },
            rows,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("db.csv");
        let db = sample_db();
        write_database(&db, &path).unwrap();
        assert_eq!(read_database(&path).unwrap(), db);
    }

    fn rewrite(f: impl Fn(&str) -> String) -> Result<SlopeDatabase> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("db.csv");
        write_database(&sample_db(), &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, f(&text)).unwrap();
        read_database(&path)
    }

    #[test]
    fn shuffled_rows_rejected() {
        let err = rewrite(|t| {
            let mut lines: Vec<&str> = t.lines().collect();
            let n = lines.len();
            lines.swap(n - 1, n - 3);
            lines.join("\n") + "\n"
        })
        .unwrap_err();
        assert!(matches!(err, Error::Ordering { .. }), "{err}");
    }

    #[test]
    fn missing_column_named() {
        let err = rewrite(|t| {
            t.lines()
                .map(|l| {
                    if l.starts_with('#') {
                        return l.to_string();
                    }
                    let mut f: Vec<&str> = l.split(',').collect();
                    f.remove(7);
                    f.join(",")
                })
                .collect::<Vec<_>>()
                .join("\n")
        })
        .unwrap_err();
        assert!(matches!(&err, Error::Schema(m) if m.contains("Sn7")), "{err}");
    }

    #[test]
    fn row_count_mismatch_rejected() {
        let err = rewrite(|t| t.replace("# rows=5", "# rows=6")).unwrap_err();
        assert!(matches!(err, Error::RowCount { expected: 6, found: 5 }), "{err}");
    }

    #[test]
    fn bad_number_rejected() {
        let err = rewrite(|t| t.replacen("\n17,", "\n17x,", 1)).unwrap_err();
        assert!(matches!(&err, Error::Schema(m) if m.contains("MR_MPa")), "{err}");
    }

    #[test]
    fn matrix_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = DeflectionMatrix {
            offsets: vec![0.0, 0.01, 0.02],
            moduli_mpa: vec![16.0, 17.0],
            columns: vec![vec![1784.9159949445968, 1785.0, 1.0 / 3.0], vec![2.0, 3.0, 4.0]],
        };
        write_matrix(&m, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("x_m,E016,E017\n"));
        assert_eq!(read_matrix(&path).unwrap(), m);
    }
}
