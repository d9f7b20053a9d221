use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use spinforge::units::CONVENTION_NOTE;

use crate::error::{CliError, CliResult};

/// Version stamped into every meta file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Fixed formatting: 12 significant digits, '.' decimal point.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else if v == 0.0 {
        // no "-0"
        format!("{:.11e}", 0.0)
    } else {
        format!("{v:.11e}")
    }
}

/// Column-major numeric table written as CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Table { columns, rows: Vec::new() }
    }

    /// Builds a table from equally long columns.
    pub fn from_columns(named: Vec<(String, Vec<f64>)>) -> CliResult<Self> {
        let len = named.first().map_or(0, |c| c.1.len());
        if let Some((name, _)) = named.iter().find(|c| c.1.len() != len) {
            return Err(CliError::Invariant(format!("column {name} has a different length")));
        }
        let rows = (0..len).map(|k| named.iter().map(|c| c.1[k]).collect()).collect();
        Ok(Table {
            columns: named.into_iter().map(|c| c.0).collect(),
            rows,
        })
    }

    pub fn push_row(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# {CONVENTION_NOTE}\n{}\n", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format_value(*v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Inverse of [`Table::to_csv`]; `#` lines are skipped.
    pub fn parse_csv(text: &str) -> Option<Self> {
        let mut lines = text.lines().filter(|l| !l.starts_with('#'));
        let columns = lines.next()?.split(',').map(str::to_owned).collect();
        let mut table = Table::new(columns);
        for line in lines {
            let row: Option<Vec<f64>> = line.split(',').map(|c| c.parse().ok()).collect();
            let row = row?;
            if row.len() != table.columns.len() {
                return None;
            }
            table.rows.push(row);
        }
        Some(table)
    }
}

/// A CSV table plus its meta JSON, named `<stem>_data.csv` and
/// `<stem>_meta.json`.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub stem: String,
    pub table: Table,
    pub meta: Value,
}

impl Artifact {
    /// `meta` is extended with the version, unit note and column list.
    pub fn new(stem: impl Into<String>, table: Table, mut meta: Map<String, Value>) -> Self {
        let stem = stem.into();
        meta.insert("artifact".into(), json!(stem));
        meta.insert("version".into(), json!(VERSION));
        meta.insert("units".into(), json!(CONVENTION_NOTE));
        meta.insert("columns".into(), json!(table.columns));
        Artifact {
            stem,
            table,
            meta: Value::Object(meta),
        }
    }

    pub fn paths(&self, dir: &Path) -> [PathBuf; 2] {
        output_paths(dir, &self.stem)
    }

    /// Writes both files through temporaries; on failure nothing is left
    /// behind.
    pub fn write(&self, dir: &Path) -> CliResult<[PathBuf; 2]> {
        let paths = self.paths(dir);
        let meta = serde_json::to_string_pretty(&self.meta).map_err(|e| CliError::Invariant(e.to_string()))? + "\n";
        let result = fs::create_dir_all(dir)
            .map_err(|e| io_error(dir, e))
            .and_then(|_| write_atomic(&paths[0], &self.table.to_csv()))
            .and_then(|_| write_atomic(&paths[1], &meta));
        if result.is_err() {
            remove_outputs(dir, &self.stem);
        }
        result.map(|_| paths)
    }
}

pub fn output_paths(dir: &Path, stem: &str) -> [PathBuf; 2] {
    [dir.join(format!("{stem}_data.csv")), dir.join(format!("{stem}_meta.json"))]
}

/// Removes the artifact pair (and temporaries) of `stem`, ignoring files
/// that do not exist.
pub fn remove_outputs(dir: &Path, stem: &str) {
    for path in output_paths(dir, stem) {
        let _ = fs::remove_file(tmp_path(&path));
        let _ = fs::remove_file(&path);
    }
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

fn write_atomic(path: &Path, text: &str) -> CliResult<()> {
    let tmp = tmp_path(path);
    fs::write(&tmp, text)
        .and_then(|_| fs::rename(&tmp, path))
        .map_err(|e| {
            let _ = fs::remove_file(&tmp);
            io_error(path, e)
        })
}

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source,
    }
}
