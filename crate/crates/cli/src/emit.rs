//! Deterministic data emission. Floats are written in Rust's shortest
//! round-trip decimal form, so equal values always produce equal bytes and
//! a fixed seed yields byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::config::OutputFormat;
use crate::{CliError, CliResult};

/// One value cell in an output table.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
}

impl Cell {
    fn write_csv(&self, out: &mut String) {
        match self {
            // shortest round-trip representation via the standard formatter
            Cell::F(x) => write!(out, "{x}").unwrap(),
            Cell::I(x) => write!(out, "{x}").unwrap(),
            Cell::S(s) => write!(out, "{s}").unwrap(),
        }
    }

    fn to_json(&self) -> serde_json::Value {
        match self {
            Cell::F(x) => serde_json::json!(x),
            Cell::I(x) => serde_json::json!(x),
            Cell::S(s) => serde_json::json!(s),
        }
    }
}

/// A named, column-ordered result table.
#[derive(Debug, Clone)]
pub struct OutputTable {
    /// Base name without extension, e.g. "localization".
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl OutputTable {
    pub fn new(name: &str, columns: Vec<&'static str>) -> Self {
        Self { name: name.to_string(), columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: OutputFormat) -> (String, String) {
        match format {
            OutputFormat::Csv => (format!("{}.csv", self.name), self.render_csv()),
            OutputFormat::Json => (format!("{}.json", self.name), self.render_json()),
        }
    }

    fn render_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                cell.write_csv(&mut out);
            }
            out.push('\n');
        }
        out
    }

    fn render_json(&self) -> String {
        let value = serde_json::json!({
            "columns": self.columns,
            "rows": self.rows.iter()
                .map(|r| r.iter().map(Cell::to_json).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
        });
        let mut text = serde_json::to_string_pretty(&value).expect("table serializes");
        text.push('\n');
        text
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes every table plus a `manifest.json` recording the tool version, the
/// hash of the canonical config, and a checksum per emitted file.
pub fn write_outputs(
    dir: &Path,
    format: OutputFormat,
    canonical_config: &str,
    tables: &[OutputTable],
) -> CliResult<Vec<String>> {
    let io_err = |path: &Path, source: std::io::Error| CliError::Io {
        path: path.display().to_string(),
        source,
    };
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut checksums: BTreeMap<String, String> = BTreeMap::new();
    let mut written = Vec::new();
    for table in tables {
        let (name, content) = table.render(format);
        let path = dir.join(&name);
        fs::write(&path, &content).map_err(|e| io_err(&path, e))?;
        checksums.insert(name.clone(), sha256_hex(content.as_bytes()));
        written.push(name);
    }
    let manifest = serde_json::json!({
        "tool": "modalsim",
        "version": env!("CARGO_PKG_VERSION"),
        "config_sha256": sha256_hex(canonical_config.as_bytes()),
        "files": checksums,
    });
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    let path = dir.join("manifest.json");
    fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    written.push("manifest.json".to_string());
    Ok(written)
}
