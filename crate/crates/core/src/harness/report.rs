//! Report bundle assembly and emission.
//!
//! All numeric output flows from the config seed: nothing here reads the
//! clock, so reruns with the same config produce byte-identical files.

use std::path::Path;

use serde::Serialize;

use crate::error::Result;

use super::config::ExperimentConfig;

pub const SCHEMA_VERSION: u32 = 1;

/// Deterministic float formatting shared by every CSV column.
pub fn fmt(x: f64) -> String {
    format!("{:.10e}", x)
}

/// Builds a CSV body from a header and rows of already-formatted cells.
pub fn csv_body(header: &str, rows: &[Vec<String>]) -> String {
    let mut out = String::with_capacity(rows.len() * 64);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub pass: bool,
    /// Suite-specific summary numbers.
    pub details: serde_json::Value,
    /// `(file name, body)` pairs written next to the summary.
    #[serde(skip)]
    pub csv_files: Vec<(String, String)>,
}

impl SuiteReport {
    pub fn new(name: &str, pass: bool, details: serde_json::Value) -> Self {
        SuiteReport { name: name.to_string(), pass, details, csv_files: Vec::new() }
    }

    pub fn with_csv(mut self, file: &str, body: String) -> Self {
        self.csv_files.push((file.to_string(), body));
        self
    }
}

/// Everything one experiment run produced.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub config: ExperimentConfig,
    pub suites: Vec<SuiteReport>,
}

impl Bundle {
    /// Conjunction of the suite pass flags (true for an empty selection).
    pub fn pass(&self) -> bool {
        self.suites.iter().all(|s| s.pass)
    }

    pub fn summary_json(&self) -> serde_json::Value {
        let mut suites = serde_json::Map::new();
        for s in &self.suites {
            suites.insert(
                s.name.clone(),
                serde_json::json!({ "pass": s.pass, "details": s.details }),
            );
        }
        serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "pass": self.pass(),
            "suites": suites,
            "config": self.config,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmitFormat {
    Json,
    Csv,
}

/// Writes the bundle under `out`: `summary.json` and/or the per-suite CSVs.
pub fn emit(bundle: &Bundle, out: &Path, formats: &[EmitFormat]) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(out)?;
    let mut written = Vec::new();
    if formats.contains(&EmitFormat::Json) {
        let path = out.join("summary.json");
        std::fs::write(&path, serde_json::to_string_pretty(&bundle.summary_json())? + "\n")?;
        written.push(path);
    }
    if formats.contains(&EmitFormat::Csv) {
        for suite in &bundle.suites {
            for (file, body) in &suite.csv_files {
                let path = out.join(file);
                std::fs::write(&path, body)?;
                written.push(path);
            }
        }
    }
    Ok(written)
}
