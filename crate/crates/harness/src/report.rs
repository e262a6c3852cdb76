//! Tables and their CSV / JSON-lines serialization.
//!
//! Both formats start with the config hash. CSV files carry it as a comment
//! line `# config_hash=<hex>` followed by the column header; JSON-lines files
//! carry it in a first object `{"config_hash": ..., "columns": [...]}`.
//! Floats are written with 17 significant digits (`{:.16e}`), so parsing a
//! report gives back the exact in-memory values.

use std::io::Write;
use std::path::Path;

use crate::error::{HarnessError, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
}

impl From<i64> for Value {
    fn from(x: i64) -> Self {
        Value::Int(x)
    }
}

impl From<u64> for Value {
    fn from(x: u64) -> Self {
        Value::Int(x as i64)
    }
}

impl From<usize> for Value {
    fn from(x: usize) -> Self {
        Value::Int(x as i64)
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Float(x)
    }
}

impl From<bool> for Value {
    fn from(x: bool) -> Self {
        Value::Bool(x)
    }
}

impl From<&str> for Value {
    fn from(x: &str) -> Self {
        Value::Text(x.to_string())
    }
}

impl From<String> for Value {
    fn from(x: String) -> Self {
        Value::Text(x)
    }
}

pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

impl Value {
    fn csv_field(&self) -> String {
        match self {
            Value::Int(x) => x.to_string(),
            Value::Float(x) => format_float(*x),
            Value::Bool(x) => x.to_string(),
            Value::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> String {
        match self {
            Value::Int(x) => x.to_string(),
            Value::Float(x) if x.is_finite() => format_float(*x),
            Value::Float(_) => "null".into(),
            Value::Bool(x) => x.to_string(),
            Value::Text(s) => serde_json::to_string(s).expect("string serializes"),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Float(x) => Some(*x),
            Value::Int(x) => Some(*x as f64),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the columns");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Value at `row`, `name`; panics on an unknown column.
    pub fn get(&self, row: usize, name: &str) -> &Value {
        let k = self.column(name).unwrap_or_else(|| panic!("no column {name}"));
        &self.rows[row][k]
    }

    pub fn to_csv(&self, config_hash: &str) -> Result<Vec<u8>> {
        let mut out = format!("# config_hash={config_hash}\n").into_bytes();
        {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut out);
            w.write_record(&self.columns).map_err(|e| HarnessError::Report(e.to_string()))?;
            for row in &self.rows {
                w.write_record(row.iter().map(Value::csv_field)).map_err(|e| HarnessError::Report(e.to_string()))?;
            }
            w.flush()?;
        }
        Ok(out)
    }

    pub fn to_jsonl(&self, config_hash: &str) -> Vec<u8> {
        let mut out = String::new();
        let header = serde_json::json!({ "config_hash": config_hash, "columns": self.columns });
        out.push_str(&header.to_string());
        out.push('\n');
        for row in &self.rows {
            out.push('{');
            for (k, (name, v)) in self.columns.iter().zip(row).enumerate() {
                if k > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(name).expect("string serializes"));
                out.push(':');
                out.push_str(&v.json());
            }
            out.push_str("}\n");
        }
        out.into_bytes()
    }

    pub fn render(&self, format: crate::config::Format, config_hash: &str) -> Result<Vec<u8>> {
        match format {
            crate::config::Format::Csv => self.to_csv(config_hash),
            crate::config::Format::Jsonl => Ok(self.to_jsonl(config_hash)),
        }
    }
}

/// Write to `path`, or to standard output when `path` is `None`.
pub fn write_bytes(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

/// A parsed report: config hash, columns and raw string fields.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedReport {
    pub config_hash: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn parse_csv(bytes: &[u8]) -> Result<ParsedReport> {
    let text = std::str::from_utf8(bytes).map_err(|e| HarnessError::Report(e.to_string()))?;
    let (first, rest) = text.split_once('\n').ok_or_else(|| HarnessError::Report("missing header".into()))?;
    let config_hash = first
        .strip_prefix("# config_hash=")
        .ok_or_else(|| HarnessError::Report("missing config hash line".into()))?
        .to_string();
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(rest.as_bytes());
    let columns = r.headers().map_err(|e| HarnessError::Report(e.to_string()))?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| HarnessError::Report(e.to_string()))?;
        rows.push(rec.iter().map(String::from).collect());
    }
    Ok(ParsedReport { config_hash, columns, rows })
}

pub fn parse_jsonl(bytes: &[u8]) -> Result<ParsedReport> {
    let text = std::str::from_utf8(bytes).map_err(|e| HarnessError::Report(e.to_string()))?;
    let mut lines = text.lines();
    let header: serde_json::Value = serde_json::from_str(lines.next().ok_or_else(|| HarnessError::Report("empty".into()))?)
        .map_err(|e| HarnessError::Report(e.to_string()))?;
    let config_hash = header["config_hash"].as_str().unwrap_or_default().to_string();
    let columns: Vec<String> = header["columns"]
        .as_array()
        .ok_or_else(|| HarnessError::Report("missing columns".into()))?
        .iter()
        .map(|c| c.as_str().unwrap_or_default().to_string())
        .collect();
    let mut rows = Vec::new();
    for line in lines {
        let obj: serde_json::Map<String, serde_json::Value> =
            serde_json::from_str(line).map_err(|e| HarnessError::Report(e.to_string()))?;
        rows.push(
            columns
                .iter()
                .map(|c| match &obj[c] {
                    serde_json::Value::String(s) => s.clone(),
                    serde_json::Value::Null => "NaN".to_string(),
                    v => v.to_string(),
                })
                .collect(),
        );
    }
    Ok(ParsedReport { config_hash, columns, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new(["name", "k", "x", "ok"]);
        t.push(vec!["a,b".into(), 3i64.into(), 0.1f64.into(), true.into()]);
        t.push(vec!["c".into(), (-7i64).into(), (1.0f64 / 3.0).into(), false.into()]);
        t.push(vec!["nan".into(), 0i64.into(), f64::NAN.into(), false.into()]);
        t
    }

    #[test]
    fn csv_round_trip() {
        let t = sample();
        let bytes = t.to_csv("abc").unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("# config_hash=abc\nname,k,x,ok\n\"a,b\",3,1.0000000000000001e-1,true\n"));
        let p = parse_csv(&bytes).unwrap();
        assert_eq!(p.config_hash, "abc");
        assert_eq!(p.columns, t.columns);
        assert_eq!(p.rows[0][0], "a,b");
        assert_eq!(p.rows[1][2].parse::<f64>().unwrap(), 1.0 / 3.0);
        assert!(p.rows[2][2].parse::<f64>().unwrap().is_nan());
    }

    #[test]
    fn jsonl_round_trip() {
        let t = sample();
        let bytes = t.to_jsonl("abc");
        let p = parse_jsonl(&bytes).unwrap();
        assert_eq!(p.config_hash, "abc");
        assert_eq!(p.columns, t.columns);
        assert_eq!(p.rows[1][2].parse::<f64>().unwrap(), 1.0 / 3.0);
        assert_eq!(p.rows[0][0], "a,b");
        assert_eq!(p.rows[1][3], "false");
        assert_eq!(p.rows[2][2], "NaN");
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = Table::new(["a", "b"]);
        assert_eq!(t.to_csv("h").unwrap(), b"# config_hash=h\na,b\n");
        assert_eq!(String::from_utf8(t.to_jsonl("h")).unwrap(), "{\"columns\":[\"a\",\"b\"],\"config_hash\":\"h\"}\n");
    }
}
