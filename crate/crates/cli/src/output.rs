//! CSV and JSON artifacts.
//!
//! Every CSV starts with three comment lines: tool, schema, code version,
//! command and seed; the creation time; the full resolved configuration as
//! JSON. Only the second line changes between identical runs. Floats are
//! written with 17 significant digits.

use crate::config::Config;
use serde_json::{json, Value};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const SCHEMA: u32 = 1;
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const CONFIG_PREFIX: &str = "# config=";

pub struct Header<'a> {
    pub command: &'a str,
    pub seed: Option<u64>,
    pub config: &'a Config,
}

impl Header<'_> {
    fn seed_text(&self) -> String {
        self.seed.map_or_else(|| "none".into(), |s| s.to_string())
    }

    fn config_json(&self) -> String {
        serde_json::to_string(self.config).expect("config serializes")
    }

    fn lines(&self) -> String {
        format!(
            "# photon-lattice schema={SCHEMA} version={VERSION} command={} seed={}\n# created_unix={}\n{CONFIG_PREFIX}{}\n",
            self.command,
            self.seed_text(),
            timestamp(),
            self.config_json()
        )
    }

    fn json(&self) -> Value {
        json!({
            "tool": "photon-lattice",
            "schema": SCHEMA,
            "version": VERSION,
            "command": self.command,
            "seed": self.seed,
            "created_unix": timestamp(),
            "config": self.config,
        })
    }
}

/// Seconds since the epoch; `SOURCE_DATE_EPOCH` wins when set.
fn timestamp() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.parse().ok()) {
        return t;
    }
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

/// One CSV cell.
pub enum Cell {
    F(f64),
    I(i64),
    U(usize),
    S(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::U(x)
    }
}

impl From<i32> for Cell {
    fn from(x: i32) -> Self {
        Cell::I(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::U(x as usize)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::S(x.into())
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(x: Option<T>) -> Self {
        x.map_or(Cell::Empty, Into::into)
    }
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::F(x) => fmt_f64(*x),
            Cell::I(x) => x.to_string(),
            Cell::U(x) => x.to_string(),
            Cell::S(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

pub struct Artifacts {
    pub dir: PathBuf,
    pub stem: String,
}

impl Artifacts {
    pub fn new(cfg: &Config, command: &str) -> Self {
        Artifacts {
            dir: PathBuf::from(&cfg.output.dir),
            stem: cfg.output.prefix.clone().unwrap_or_else(|| command.replace('-', "_")),
        }
    }

    pub fn csv_path(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}{suffix}.csv", self.stem))
    }

    pub fn json_path(&self) -> PathBuf {
        self.dir.join(format!("{}.json", self.stem))
    }

    pub fn write_csv(&self, suffix: &str, header: &Header, table: &Table) -> std::io::Result<PathBuf> {
        fs::create_dir_all(&self.dir)?;
        let path = self.csv_path(suffix);
        let mut file = fs::File::create(&path)?;
        file.write_all(header.lines().as_bytes())?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(&table.columns)?;
        for row in &table.rows {
            w.write_record(row.iter().map(Cell::text))?;
        }
        w.flush()?;
        Ok(path)
    }

    pub fn write_json(&self, header: &Header, summary: Value) -> std::io::Result<PathBuf> {
        fs::create_dir_all(&self.dir)?;
        let path = self.json_path();
        let doc = json!({ "header": header.json(), "summary": summary });
        let mut text = serde_json::to_string_pretty(&doc).map_err(std::io::Error::other)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }
}

/// Command and configuration recorded in an artifact's header.
pub fn read_header(path: &Path) -> Result<(String, Config), String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    if path.extension().is_some_and(|e| e == "json") {
        let v: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        let h = &v["header"];
        let cmd = h["command"].as_str().ok_or("header has no command")?.to_string();
        let cfg = serde_json::from_value(h["config"].clone()).map_err(|e| e.to_string())?;
        return Ok((cmd, cfg));
    }
    let mut lines = text.lines();
    let first = lines.next().ok_or("empty file")?;
    let cmd = first
        .split_whitespace()
        .find_map(|w| w.strip_prefix("command="))
        .ok_or("first line has no command")?
        .to_string();
    let cfg_line = lines
        .take(2)
        .find_map(|l| l.strip_prefix(CONFIG_PREFIX))
        .ok_or("no config line in header")?;
    let cfg = serde_json::from_str(cfg_line).map_err(|e| e.to_string())?;
    Ok((cmd, cfg))
}
