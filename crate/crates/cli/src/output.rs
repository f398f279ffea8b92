//! Tabular result files and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::config::{Format, RunConfig};
use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq)]
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

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

/// Nine significant digits, `inf`/`-inf`/`nan` for non-finite values.
pub fn fmt9(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else if v == 0.0 {
        "0".into()
    } else {
        format!("{v:.8e}")
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Num(v) => fmt9(*v),
                    Cell::Int(i) => i.to_string(),
                    Cell::Text(t) => t.clone(),
                    Cell::Empty => String::new(),
                })
                .collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    fn json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut m = Map::new();
                for (c, v) in self.columns.iter().zip(row) {
                    m.insert(c.to_string(), cell_json(v));
                }
                Value::Object(m)
            })
            .collect();
        Value::Array(rows)
    }
}

fn cell_json(c: &Cell) -> Value {
    match c {
        Cell::Num(v) if v.is_finite() => {
            let rounded: f64 = fmt9(*v).parse().expect("formatted float parses");
            json!(rounded)
        }
        Cell::Num(v) => Value::String(fmt9(*v)),
        Cell::Int(i) => json!(i),
        Cell::Text(t) => Value::String(t.clone()),
        Cell::Empty => Value::Null,
    }
}

/// Writes results beneath one output directory and remembers the files.
pub struct Emitter {
    dir: PathBuf,
    format: Format,
    written: Vec<PathBuf>,
}

impl Emitter {
    pub fn new(dir: &Path, format: Format) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
        Ok(Emitter { dir: dir.to_path_buf(), format, written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    /// Writes `stem.csv` or `stem.json`; an empty table gives a header-only file.
    pub fn table(&mut self, stem: &str, table: &Table) -> CliResult<PathBuf> {
        if table.rows.is_empty() {
            log::warn!("{stem}: no rows, writing header only");
        }
        let (name, body) = match self.format {
            Format::Csv => (format!("{stem}.csv"), table.csv()),
            Format::Json => {
                let doc = json!({ "columns": table.columns, "rows": table.json() });
                (format!("{stem}.json"), serde_json::to_string_pretty(&doc).expect("json") + "\n")
            }
        };
        self.raw(&name, body.as_bytes())
    }

    /// Writes a file through a writer callback.
    pub fn with_writer<F>(&mut self, name: &str, f: F) -> CliResult<PathBuf>
    where
        F: FnOnce(&mut dyn Write) -> diabolo_core::Result<()>,
    {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.raw(name, &buf)
    }

    pub fn raw(&mut self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// Writes `manifest.json`: config echo, constants, derived defaults and versions.
    pub fn manifest(&mut self, cfg: &RunConfig, derived: Map<String, Value>) -> CliResult<PathBuf> {
        let constants: Map<String, Value> = diabolo_core::constants::ALL
            .iter()
            .map(|(name, v, unit)| (name.to_string(), json!({ "value": v, "unit": unit })))
            .collect();
        let outputs: Vec<String> = self
            .written
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect();
        let doc = json!({
            "tool": "diabolo",
            "cli_version": env!("CARGO_PKG_VERSION"),
            "core_version": diabolo_core::VERSION,
            "mode": cfg.mode.name(),
            "config": serde_json::to_value(&cfg.file).map_err(|e| CliError::config(e.to_string()))?,
            "constants": constants,
            "derived": derived,
            "outputs": outputs,
        });
        let body = serde_json::to_string_pretty(&doc).expect("json") + "\n";
        self.raw("manifest.json", body.as_bytes())
    }
}
