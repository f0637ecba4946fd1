//! Output files: CSV or JSON tables, versioned JSON documents and the run summary.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use intermix_core::statistics::SlopeFit;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;
pub const SUMMARY_SCHEMA: &str = include_str!("../schema/summary.schema.json");
pub const FIT_SCHEMA: &str = include_str!("../schema/fit.schema.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
    Empty,
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

/// Shortest round-trip decimal, switching to exponent form for very small or large values.
pub fn fmt_float(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if (v.abs() >= 1e-4 && v.abs() < 1e15) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// CSV form: 17 significant digits, with negative zero written as zero.
pub fn csv_float(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.16e}")
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => csv_float(*v),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::from(*v),
            Cell::Float(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Empty => Value::Null,
        }
    }
}

pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::csv)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| {
                    let m: serde_json::Map<String, Value> = self.header.iter().zip(r).map(|(h, c)| (h.to_string(), c.json())).collect();
                    Value::Object(m)
                })
                .collect(),
        )
    }
}

/// A tail table stored for later runs. Not flattened, so integer map keys survive.
#[derive(Debug, Serialize, Deserialize)]
pub struct TailDoc {
    pub schema_version: u32,
    pub table: intermix_core::inducing::TailTable,
}

/// A JSON document tagged with the schema version.
#[derive(Debug, Serialize, Deserialize)]
pub struct Versioned<T> {
    pub schema_version: u32,
    #[serde(flatten)]
    pub body: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: Option<f64>,
    pub requirement: String,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, measured: f64, requirement: impl Into<String>, pass: bool) -> Self {
        Self {
            name: name.into(),
            measured: measured.is_finite().then_some(measured),
            requirement: requirement.into(),
            pass,
        }
    }

    pub fn at_most(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self::new(name, measured, format!("<= {}", fmt_float(bound)), measured <= bound)
    }

    pub fn within(name: impl Into<String>, measured: f64, target: f64, tol: f64) -> Self {
        Self::new(
            name,
            measured,
            format!("{} +- {}", fmt_float(target), fmt_float(tol)),
            (measured - target).abs() <= tol,
        )
    }
}

/// Outcome of one subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub command: String,
    pub seed: u64,
    pub pass: bool,
    pub partial: bool,
    pub checks: Vec<Check>,
    pub fits: BTreeMap<String, SlopeFit>,
    pub info: BTreeMap<String, f64>,
    pub files: Vec<String>,
}

impl RunSummary {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            command: command.into(),
            seed,
            pass: true,
            partial: false,
            checks: Vec::new(),
            fits: BTreeMap::new(),
            info: BTreeMap::new(),
            files: Vec::new(),
        }
    }

    pub fn check(&mut self, c: Check) {
        self.pass &= c.pass;
        self.checks.push(c);
    }

    pub fn check_named(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct SummaryFile {
    runs: BTreeMap<String, RunSummary>,
}

/// Writes the files of one run into the output directory.
pub struct Writer {
    pub dir: PathBuf,
    pub format: Format,
    written: Vec<String>,
}

impl Writer {
    pub fn new(dir: &Path, format: Format) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.into(),
            format,
            written: Vec::new(),
        })
    }

    fn put(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(name.into());
        Ok(())
    }

    /// Writes `stem.csv` or `stem.json` depending on the format.
    pub fn table(&mut self, stem: &str, t: &Table) -> Result<()> {
        match self.format {
            Format::Csv => self.put(&format!("{stem}.csv"), &t.to_csv()),
            Format::Json => {
                let doc = Versioned {
                    schema_version: SCHEMA_VERSION,
                    body: serde_json::json!({ "rows": t.to_json() }),
                };
                self.put(&format!("{stem}.json"), &(serde_json::to_string_pretty(&doc)? + "\n"))
            }
        }
    }

    pub fn json<T: Serialize>(&mut self, name: &str, body: &T) -> Result<()> {
        let doc = Versioned {
            schema_version: SCHEMA_VERSION,
            body,
        };
        self.put(name, &(serde_json::to_string_pretty(&doc)? + "\n"))
    }

    pub fn tail_table(&mut self, name: &str, table: &intermix_core::inducing::TailTable) -> Result<()> {
        let doc = TailDoc {
            schema_version: SCHEMA_VERSION,
            table: table.clone(),
        };
        self.put(name, &(serde_json::to_string_pretty(&doc)? + "\n"))
    }

    pub fn fit(&mut self, name: &str, fit: &SlopeFit) -> Result<()> {
        self.json(name, fit)
    }

    pub fn text(&mut self, name: &str, text: &str) -> Result<()> {
        self.put(name, text)
    }

    /// Records the run in `summary.json`, replacing any earlier run of the same command.
    pub fn finish(mut self, mut summary: RunSummary) -> Result<RunSummary> {
        self.written.push("summary.json".into());
        summary.files = std::mem::take(&mut self.written);
        let path = self.dir.join("summary.json");
        let mut file = match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str::<Versioned<SummaryFile>>(&text)
                .map(|v| v.body)
                .unwrap_or_default(),
            Err(_) => SummaryFile::default(),
        };
        file.runs.insert(summary.command.clone(), summary.clone());
        let doc = Versioned {
            schema_version: SCHEMA_VERSION,
            body: file,
        };
        fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(summary)
    }
}
