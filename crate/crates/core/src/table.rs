//! Tabular output: a `#`-prefixed metadata prologue followed by a plain CSV body.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};

pub const TOOL_VERSION: &str = concat!("cqnc ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Ordered `key: value` pairs; values are single-line.
    pub metadata: Vec<(String, String)>,
}

/// Shortest decimal string that parses back to the same `f64`.
pub fn format_number(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

impl OutputTable {
    pub fn new(columns: Vec<String>) -> Result<Self> {
        for (i, c) in columns.iter().enumerate() {
            if c.is_empty() || c.contains([',', '\n', '"']) {
                return Err(Error::Config(format!("invalid column name {c:?}")));
            }
            if columns[..i].contains(c) {
                return Err(Error::Config(format!("duplicate column {c:?}")));
            }
        }
        Ok(Self {
            columns,
            rows: Vec::new(),
            metadata: Vec::new(),
        })
    }

    pub fn push_row(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Config(format!(
                "row has {} values, table has {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn add_metadata(&mut self, key: impl Into<String>, value: impl Into<String>) {
        let value: String = value.into();
        self.metadata.push((key.into(), value.replace('\n', " ")));
    }

    pub fn metadata_value(&self, key: &str) -> Option<&str> {
        self.metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&x| format_number(x)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut metadata = Vec::new();
        let mut body_start = 0;
        for line in text.split_inclusive('\n') {
            let Some(rest) = line.strip_prefix('#') else {
                break;
            };
            body_start += line.len();
            let rest = rest.trim_end_matches('\n').trim_start_matches(' ');
            let (k, v) = rest.split_once(": ").unwrap_or((rest, ""));
            metadata.push((k.to_string(), v.to_string()));
        }
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(&text.as_bytes()[body_start..]);
        let bad = |e: csv::Error| Error::Config(format!("malformed table: {e}"));
        let columns: Vec<String> = reader
            .headers()
            .map_err(bad)?
            .iter()
            .map(String::from)
            .collect();
        let mut table = OutputTable::new(columns)?;
        table.metadata = metadata;
        for record in reader.records() {
            let record = record.map_err(bad)?;
            let row = record
                .iter()
                .map(|cell| {
                    cell.parse::<f64>()
                        .map_err(|_| Error::Config(format!("not a number: {cell:?}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            table.push_row(row)?;
        }
        Ok(table)
    }

    /// JSON description of the table's columns and metadata.
    pub fn sidecar_json(&self) -> String {
        let mut meta = serde_json::Map::new();
        for (k, v) in &self.metadata {
            let value =
                serde_json::from_str(v).unwrap_or_else(|_| serde_json::Value::String(v.clone()));
            meta.insert(k.clone(), value);
        }
        let doc = serde_json::json!({
            "columns": self.columns,
            "rows": self.rows.len(),
            "metadata": meta,
        });
        serde_json::to_string_pretty(&doc).expect("sidecar serialises") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [
            0.0,
            -0.0,
            1.0,
            0.1,
            1e-4,
            9.99e-5,
            1e16,
            1.2345678901234567e300,
            5e-324,
            -3.25,
            f64::MAX,
        ] {
            let s = format_number(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(format_number(1e-7), "1e-7");
        assert_eq!(format_number(0.5), "0.5");
    }

    #[test]
    fn csv_reemits_byte_identical() {
        let mut t = OutputTable::new(vec!["x".into(), "S_sql".into()]).unwrap();
        t.add_metadata("params", r#"{"kappa":1000000.0}"#);
        t.add_metadata("source", "S_sql");
        t.push_row(vec![0.2, 1.0 / 3.0]).unwrap();
        t.push_row(vec![1.0, 1e-12]).unwrap();
        let text = t.to_csv();
        let parsed = OutputTable::from_csv(&text).unwrap();
        assert_eq!(parsed, t);
        assert_eq!(parsed.to_csv(), text);
    }

    #[test]
    fn rejects_duplicate_columns_and_ragged_rows() {
        assert!(OutputTable::new(vec!["a".into(), "a".into()]).is_err());
        let mut t = OutputTable::new(vec!["a".into()]).unwrap();
        assert!(t.push_row(vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn sidecar_embeds_json_metadata() {
        let mut t = OutputTable::new(vec!["a".into()]).unwrap();
        t.add_metadata("params", r#"{"T":0.0}"#);
        let v: serde_json::Value = serde_json::from_str(&t.sidecar_json()).unwrap();
        assert_eq!(v["metadata"]["params"]["T"], 0.0);
    }
}
