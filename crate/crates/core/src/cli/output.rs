//! CSV tables and the JSON run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// Shortest-form-independent float text: 17 significant digits in
/// scientific notation, `nan`/`inf` for non-finite values.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self { header: header.iter().map(|h| h.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, c) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                match c {
                    Cell::Num(v) => out.push_str(&format_float(*v)),
                    Cell::Int(v) => write!(out, "{v}").expect("write to string"),
                    Cell::Text(s) => out.push_str(s),
                    Cell::Empty => {}
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(
            self.rows
                .iter()
                .map(|r| match r[i] {
                    Cell::Num(v) => v,
                    Cell::Int(v) => v as f64,
                    _ => f64::NAN,
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }

    pub fn line(&self) -> String {
        format!("[{}] {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorRecord {
    pub kind: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: &'static str,
    /// The run configuration as TOML; parsing it reproduces the run.
    pub config: Option<String>,
    pub seeds: Vec<u64>,
    pub cutoffs: Vec<usize>,
    pub wall_time_s: f64,
    pub files: Vec<String>,
    pub point_errors: Vec<String>,
    pub checks: Vec<Check>,
    pub error: Option<ErrorRecord>,
}

impl Manifest {
    pub fn new(command: impl Into<String>) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION"),
            config: None,
            seeds: Vec::new(),
            cutoffs: Vec::new(),
            wall_time_s: 0.0,
            files: Vec::new(),
            point_errors: Vec::new(),
            checks: Vec::new(),
            error: None,
        }
    }
}

/// Output directory that records every file it writes.
pub struct Writer {
    dir: PathBuf,
    pub manifest: Manifest,
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::InvalidParameter { name: "output", reason: format!("{}: {e}", path.display()) }
}

impl Writer {
    pub fn new(dir: impl Into<PathBuf>, command: impl Into<String>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        Ok(Self { dir, manifest: Manifest::new(command) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|e| io_err(&path, e))?;
        self.manifest.files.push(name.to_string());
        Ok(path)
    }

    pub fn table(&mut self, name: &str, table: &Table) -> Result<PathBuf> {
        self.text(name, &table.to_csv())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let body = serde_json::to_string_pretty(value)
            .map_err(|e| Error::InvalidParameter { name: "output", reason: e.to_string() })?;
        self.text(name, &(body + "\n"))
    }

    pub fn finish(&self) -> Result<PathBuf> {
        let path = self.dir.join("manifest.json");
        let body = serde_json::to_string_pretty(&self.manifest)
            .map_err(|e| Error::InvalidParameter { name: "output", reason: e.to_string() })?;
        fs::write(&path, body + "\n").map_err(|e| io_err(&path, e))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_carry_seventeen_significant_digits() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(-2.5), "-2.5000000000000000e0");
        assert_eq!(format_float(f64::NAN), "nan");
        let x = 1.0 / 3.0;
        assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn csv_uses_newlines_and_blank_absent_cells() {
        let mut t = Table::new(&["a", "b", "c"]);
        t.push(vec![Cell::Num(1.0), Cell::Empty, Cell::Int(3)]);
        assert_eq!(t.to_csv(), "a,b,c\n1.0000000000000000e0,,3\n");
        assert_eq!(t.column("c"), Some(vec![3.0]));
    }

    #[test]
    fn writer_records_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = Writer::new(dir.path(), "test").unwrap();
        w.text("x.txt", "hi\n").unwrap();
        w.finish().unwrap();
        let manifest = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
        assert!(manifest.contains("x.txt"));
    }
}
