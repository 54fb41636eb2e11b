//! Tidy tables (CSV or JSON) and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::{Format, RunConfig};

#[derive(Clone, Debug)]
pub enum Field {
    Int(u64),
    Float(f64),
    Text(String),
}

impl Field {
    /// 17 significant digits, so a CSV value parses back to the same f64.
    fn csv(&self) -> String {
        match self {
            Field::Int(v) => v.to_string(),
            Field::Float(v) => format!("{v:.16e}"),
            Field::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Field::Int(v) => Value::from(*v),
            Field::Float(v) => Value::from(*v),
            Field::Text(s) => Value::from(s.as_str()),
        }
    }
}

pub struct Table {
    pub stem: &'static str,
    pub header: &'static [&'static str],
    pub rows: Vec<Vec<Field>>,
}

impl Table {
    pub fn new(stem: &'static str, header: &'static [&'static str]) -> Self {
        Self {
            stem,
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Field>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, dir: &Path, format: Format) -> Result<PathBuf, String> {
        let io = |e: &dyn std::fmt::Display| format!("writing {}: {e}", self.stem);
        match format {
            Format::Csv => {
                let path = dir.join(format!("{}.csv", self.stem));
                let mut w = csv::Writer::from_path(&path).map_err(|e| io(&e))?;
                w.write_record(self.header).map_err(|e| io(&e))?;
                for row in &self.rows {
                    w.write_record(row.iter().map(Field::csv))
                        .map_err(|e| io(&e))?;
                }
                w.flush().map_err(|e| io(&e))?;
                Ok(path)
            }
            Format::Json => {
                let path = dir.join(format!("{}.json", self.stem));
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let obj: Map<String, Value> = self
                            .header
                            .iter()
                            .zip(row)
                            .map(|(k, v)| (k.to_string(), v.json()))
                            .collect();
                        Value::Object(obj)
                    })
                    .collect();
                write_json(&path, &rows)?;
                Ok(path)
            }
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), String> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| format!("serializing {}: {e}", path.display()))?;
    fs::write(path, text + "\n").map_err(|e| format!("writing {}: {e}", path.display()))
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

#[derive(Serialize)]
pub struct Manifest<R: Serialize> {
    pub command: Vec<String>,
    pub config: RunConfig,
    pub seed: u64,
    pub workers: usize,
    pub version: &'static str,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub outputs: Vec<PathBuf>,
    /// Per-run notes such as sampler diagnostics or SDE flags.
    pub notes: Vec<String>,
    pub reports: Option<R>,
}
