//! CSV and JSON file handling plus deferred output writing.

use std::fs;
use std::path::{Path, PathBuf};

use mds_recover::LabelVector;
use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Parses a comma-separated numeric table. A first line whose first token
/// is not a number is treated as a header and skipped.
pub fn parse_table(text: &str, source: &str) -> Result<Vec<Vec<f64>>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (index, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::usage(format!("{source}: {e}")))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if index == 0 && record.get(0).is_some_and(|t| t.parse::<f64>().is_err()) {
            continue;
        }
        let line = record.position().map_or(index + 1, |p| p.line() as usize);
        let row = record
            .iter()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| CliError::usage(format!("{source}: line {line}: '{t}' is not a number")))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if let Some(first) = rows.first().map(Vec::len) {
            if row.len() != first {
                return Err(CliError::usage(format!(
                    "{source}: line {line} has {} fields, expected {first}",
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>, CliError> {
    let rows = parse_table(&read_text(path)?, &path.display().to_string())?;
    if rows.is_empty() || rows[0].is_empty() {
        return Err(CliError::usage(format!("{}: no numeric rows", path.display())));
    }
    let (n, d) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(n, d, |i, j| rows[i][j]))
}

/// One 1-based label per line.
pub fn read_labels(path: &Path) -> Result<LabelVector, CliError> {
    let rows = parse_table(&read_text(path)?, &path.display().to_string())?;
    let labels = rows
        .iter()
        .map(|row| match row.as_slice() {
            &[v] if v >= 1.0 && v.fract() == 0.0 && v <= usize::MAX as f64 => Ok(v as usize),
            _ => Err(CliError::usage(format!(
                "{}: each line must hold one positive integer label",
                path.display()
            ))),
        })
        .collect::<Result<Vec<usize>, _>>()?;
    Ok(LabelVector::infer_k(labels)?)
}

/// Rust's `Display` for `f64` prints the shortest string that parses back
/// to the same value.
pub fn matrix_csv(m: &DMatrix<f64>, header: Option<&[String]>) -> Vec<u8> {
    let mut out = String::new();
    if let Some(h) = header {
        out.push_str(&h.join(","));
        out.push('\n');
    }
    for row in m.row_iter() {
        let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

pub fn labels_csv(labels: &LabelVector) -> Vec<u8> {
    labels.as_slice().iter().map(|l| format!("{l}\n")).collect::<String>().into_bytes()
}

pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("output records serialize");
    bytes.push(b'\n');
    bytes
}

/// Reads a JSON config. An optional `schema_version` key must equal the
/// supported version; every other key goes to `T`.
pub fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = read_text(path)?;
    let source = path.display();
    let mut value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{source}: malformed JSON: {e}")))?;
    let object = value
        .as_object_mut()
        .ok_or_else(|| CliError::usage(format!("{source}: expected a JSON object")))?;
    if let Some(version) = object.remove("schema_version") {
        if version.as_u64() != Some(SCHEMA_VERSION as u64) {
            return Err(CliError::usage(format!(
                "{source}: unsupported schema_version {version}, expected {SCHEMA_VERSION}"
            )));
        }
    }
    serde_json::from_value(value).map_err(|e| CliError::usage(format!("{source}: {e}")))
}

/// Reads a JSON file written by this tool, ignoring fields the caller does
/// not need.
pub fn read_record<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

/// Output files held in memory until the command has finished computing.
#[derive(Default)]
pub struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, path: impl Into<PathBuf>, contents: Vec<u8>) {
        self.files.push((path.into(), contents));
    }

    /// Writes every file; on the first failure removes those already written.
    pub fn commit(self) -> Result<Vec<PathBuf>, CliError> {
        let mut written = Vec::with_capacity(self.files.len());
        for (path, contents) in self.files {
            if let Err(e) = fs::write(&path, contents) {
                let _ = fs::remove_file(&path);
                for done in &written {
                    let _ = fs::remove_file(done);
                }
                return Err(CliError::usage(format!("cannot write {}: {e}", path.display())));
            }
            written.push(path);
        }
        Ok(written)
    }
}

/// `<prefix><suffix>`, so prefixes may name a directory or a file stem.
pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_detected_by_first_token() {
        let rows = parse_table("x,y\n1,2\n3,4\n", "t").unwrap();
        assert_eq!(rows, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let rows = parse_table("1,2\n3,4\n", "t").unwrap();
        assert_eq!(rows.len(), 2);
    }

    #[test]
    fn ragged_rows_are_rejected() {
        assert!(parse_table("1,2\n3\n", "t").is_err());
        assert!(parse_table("1,2\n3,abc\n", "t").is_err());
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let m = DMatrix::from_row_slice(2, 3, &[0.1, -1e-300, 1.0 / 3.0, 2f64.sqrt(), 6.02214076e23, -0.0]);
        let text = String::from_utf8(matrix_csv(&m, None)).unwrap();
        let back = parse_table(&text, "t").unwrap();
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!(back[i][j].to_bits(), m[(i, j)].to_bits());
            }
        }
    }

    #[test]
    fn suffix_appends_to_prefix() {
        assert_eq!(with_suffix(Path::new("out/run"), "_X.csv"), PathBuf::from("out/run_X.csv"));
    }
}
