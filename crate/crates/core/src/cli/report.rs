//! Run reports: named tables, digests and their CSV/JSON forms.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::atomic_write;

/// Marker written in place of rows when a table legitimately has none.
pub const EMPTY_MARKER: &str = "# empty";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    /// Why the table has no rows; required when `rows` is empty.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empty: Option<String>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Table {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            empty: None,
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width for {}", self.name);
        self.rows.push(row);
    }

    /// Closes the table, recording `reason` if nothing was pushed.
    pub fn or_empty(mut self, reason: impl Into<String>) -> Self {
        if self.rows.is_empty() {
            self.empty = Some(reason.into());
        }
        self
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn to_csv(&self, metadata: &[(&str, String)]) -> Result<String> {
        let mut out = String::new();
        for (k, v) in metadata {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        out.push_str(&format!("# table: {}\n", self.name));
        if let Some(reason) = &self.empty {
            out.push_str(&format!("{EMPTY_MARKER}: {reason}\n"));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let internal = |e: csv::Error| Error::Internal(format!("csv: {e}"));
        w.write_record(&self.columns).map_err(internal)?;
        for row in &self.rows {
            w.write_record(row.iter().map(cell)).map_err(internal)?;
        }
        let body = w.into_inner().map_err(|e| Error::Internal(format!("csv: {e}")))?;
        out.push_str(&String::from_utf8(body).map_err(|e| Error::Internal(e.to_string()))?);
        Ok(out)
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Number(n) => match n.as_f64() {
            // shortest round-trip form, identical on every platform
            Some(x) if n.is_f64() => format!("{x:e}"),
            _ => n.to_string(),
        },
        other => other.to_string(),
    }
}

/// Finite floats as JSON numbers, anything else as null.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

pub fn text(s: impl Into<String>) -> Value {
    Value::String(s.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Info,
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub level: Level,
    pub source: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    /// SHA-256 of the canonical scenario text (defaults and overrides applied).
    pub scenario_digest: String,
    /// Git-style blob hash (SHA-256) of the scenario file as read.
    pub input_hash: String,
    pub scenario: Value,
    pub tables: Vec<Table>,
    pub diagnostics: Vec<Diagnostic>,
    /// Exit code the run maps to; nonzero when a sub-command failed.
    pub exit_code: i32,
    pub wall_time_s: f64,
}

impl RunReport {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    fn metadata(&self) -> Vec<(&'static str, String)> {
        vec![
            ("command", self.command.clone()),
            ("scenario_digest", self.scenario_digest.clone()),
            ("input_hash", self.input_hash.clone()),
        ]
    }

    /// Writes one CSV per table (`csv`) or one JSON document (`json`), plus
    /// the JSON report in the CSV case so diagnostics are never lost.
    pub fn write(&self, dir: &Path, format: Format) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        if format == Format::Csv {
            let meta = self.metadata();
            for t in &self.tables {
                let p = dir.join(format!("{}_{}.csv", self.command, t.name));
                atomic_write(&p, t.to_csv(&meta)?.as_bytes())?;
                written.push(p);
            }
        }
        let p = dir.join(format!("{}.json", self.command));
        let json = serde_json::to_vec_pretty(self).map_err(|e| Error::Internal(format!("json: {e}")))?;
        atomic_write(&p, &json)?;
        written.push(p);
        Ok(written)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// `sha256("blob <len>\0" + bytes)`, the object hash git uses in SHA-256
/// repositories.
pub fn blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
