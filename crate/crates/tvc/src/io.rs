//! Artifact file formats: numeric CSV tables with provenance comments
//! and JSON envelopes for structured payloads.
//!
//! Every float is written in the shortest decimal form that parses back
//! to the identical bits, so writing and re-reading a table is lossless
//! and re-running a deterministic pipeline reproduces files byte for
//! byte.

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Version stamp carried by every artifact this crate emits.
pub const ARTIFACT_SCHEMA_VERSION: u32 = 1;

/// Hex-encoded SHA-256 of a text, used to stamp artifacts with the exact
/// configuration that produced them.
pub fn sha256_hex(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// In-memory form of a CSV artifact: named columns over f64 rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Appends a row; the width must match the header.
    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Config(format!("table has no column named {name:?}")))
    }
}

/// A parsed CSV artifact: leading `#` comment lines plus the table.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvDocument {
    /// Comment lines without the `# ` prefix, in file order.
    pub comments: Vec<String>,
    pub table: Table,
}

impl CsvDocument {
    /// Value of a `key: value` comment, if present.
    pub fn comment_value(&self, key: &str) -> Option<&str> {
        self.comments.iter().find_map(|line| {
            line.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix(": "))
        })
    }
}

/// Renders a table as CSV text. Comments go first, one `# ` line each,
/// then the header row, then the data.
pub fn table_to_csv(table: &Table, comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    let _ = writeln!(out, "{}", table.columns.join(","));
    for row in &table.rows {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            let _ = write!(out, "{v}");
            first = false;
        }
        out.push('\n');
    }
    out
}

/// Parses CSV text produced by [`table_to_csv`]. Rows must be rectangular
/// and numeric; errors name the offending line.
pub fn csv_to_table(text: &str) -> Result<CsvDocument> {
    let mut comments = Vec::new();
    let mut columns: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if let Some(rest) = line.strip_prefix('#') {
            if columns.is_some() {
                return Err(Error::Config(format!(
                    "line {line_no}: comments must precede the header"
                )));
            }
            comments.push(rest.strip_prefix(' ').unwrap_or(rest).to_string());
            continue;
        }
        if line.is_empty() {
            continue;
        }
        match &columns {
            None => {
                let cols: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
                if cols.iter().any(|c| c.is_empty()) {
                    return Err(Error::Config(format!("line {line_no}: empty column name")));
                }
                columns = Some(cols);
            }
            Some(cols) => {
                let cells: Vec<&str> = line.split(',').collect();
                if cells.len() != cols.len() {
                    return Err(Error::Config(format!(
                        "line {line_no}: expected {} cells, found {}",
                        cols.len(),
                        cells.len()
                    )));
                }
                let mut row = Vec::with_capacity(cells.len());
                for cell in cells {
                    let v: f64 = cell.trim().parse().map_err(|_| {
                        Error::Config(format!("line {line_no}: {cell:?} is not a number"))
                    })?;
                    row.push(v);
                }
                rows.push(row);
            }
        }
    }
    let columns = columns.ok_or_else(|| Error::Config("csv has no header row".into()))?;
    Ok(CsvDocument {
        comments,
        table: Table { columns, rows },
    })
}

/// JSON wrapper stamping a payload with the artifact schema version and
/// the hash of the scenario it was derived from.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Envelope<T> {
    pub schema_version: u32,
    pub scenario_sha256: String,
    pub payload: T,
}

pub fn to_envelope_json<T: Serialize>(payload: &T, scenario_sha256: &str) -> Result<String> {
    let envelope = Envelope {
        schema_version: ARTIFACT_SCHEMA_VERSION,
        scenario_sha256: scenario_sha256.to_string(),
        payload,
    };
    Ok(serde_json::to_string_pretty(&envelope)?)
}

pub fn from_envelope_json<T: DeserializeOwned>(text: &str) -> Result<Envelope<T>> {
    let envelope: Envelope<T> = serde_json::from_str(text)?;
    if envelope.schema_version != ARTIFACT_SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "unsupported artifact schema version {}",
            envelope.schema_version
        )));
    }
    Ok(envelope)
}
