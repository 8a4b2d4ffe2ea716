//! Single-column CSV samples and JSON documents.
//!
//! A sample file is a `value` header followed by one number per line.
//! Optional `#` lines before the header carry provenance (process, seed) and
//! are skipped on read.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{HarnessError, Result};

pub const VALUE_COLUMN: &str = "value";

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| HarnessError::io(path, e))
}

/// Serializes `values` as CSV. Each comment line is prefixed with `# `.
pub fn write_values<W: Write>(out: W, values: &[f64], comments: &[String]) -> std::io::Result<()> {
    let mut out = out;
    for c in comments {
        for line in c.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record([VALUE_COLUMN])?;
    // `{:?}` is the shortest representation that parses back to the same bits.
    for &v in values {
        w.write_record([format!("{v:?}")])?;
    }
    w.flush()
}

pub fn write_values_csv(path: &Path, values: &[f64], comments: &[String]) -> Result<()> {
    let file = create(path)?;
    write_values(file, values, comments).map_err(|e| HarnessError::io(path, e))
}

/// Reads the `value` column, skipping `#` comment lines. A file whose
/// first row is numeric is read as headerless single-column data.
pub fn read_values_csv(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_values(&text).map_err(|m| HarnessError::format(path, m))
}

pub fn parse_values(text: &str) -> std::result::Result<Vec<f64>, String> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut column = None;
    let mut values = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let col = match column {
            Some(c) => c,
            None => {
                let c = match rec.iter().position(|f| f == VALUE_COLUMN) {
                    Some(c) => c,
                    None if rec.len() == 1 && rec[0].parse::<f64>().is_ok() => 0,
                    None => return Err(format!("no `{VALUE_COLUMN}` column in header")),
                };
                column = Some(c);
                if rec.get(c) == Some(VALUE_COLUMN) {
                    continue;
                }
                c
            }
        };
        let field = rec
            .get(col)
            .ok_or_else(|| format!("record {} has no column {col}", line + 1))?;
        let v: f64 = field
            .parse()
            .map_err(|_| format!("record {}: `{field}` is not a number", line + 1))?;
        values.push(v);
    }
    Ok(values)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut file = create(path)?;
    serde_json::to_writer_pretty(&mut file, value).map_err(|e| HarnessError::format(path, e))?;
    file.write_all(b"\n")
        .and_then(|_| file.flush())
        .map_err(|e| HarnessError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::format(path, e))
}
