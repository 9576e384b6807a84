use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ExperimentConfig;
use crate::bootstrap::PivotSample;
use crate::error::{Error, Result};
use crate::rand_weights::SEED_MIX_VERSION;
use crate::stats::DensityCurve;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Text(String),
    Int(usize),
    Num(f64),
    Missing,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Num(x) => fmt_sig6(*x),
            Cell::Missing => "NA".into(),
        }
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            Cell::Int(i) => Some(*i as f64),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i)
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Missing, Cell::Num)
    }
}

/// Formats `x` with 6 significant digits, in the style of C's `%g`.
pub fn fmt_sig6(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let fixed = format!("{x:.*}", (5 - exp) as usize);
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "| {} |", self.columns.join(" | "));
        let _ = writeln!(out, "|{}", "---|".repeat(self.columns.len()));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            let _ = writeln!(out, "| {} |", cells.join(" | "));
        }
        out
    }
}

/// Replicates left out of a summary, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exclusion {
    pub context: String,
    pub count: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub tables: Vec<Table>,
    /// Pivot samples keyed by file stem.
    pub pivots: Vec<(String, PivotSample)>,
    /// Density curves keyed by file stem.
    pub densities: Vec<(String, DensityCurve)>,
    pub exclusions: Vec<Exclusion>,
    pub warnings: Vec<String>,
    /// Elapsed compute time. Kept out of emitted files so that they are
    /// reproducible byte for byte.
    pub wall_time_secs: f64,
}

impl ExperimentReport {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn pivot(&self, stem: &str) -> Option<&PivotSample> {
        self.pivots.iter().find(|(s, _)| s == stem).map(|(_, p)| p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

#[derive(Serialize)]
struct Manifest<'a> {
    software: &'static str,
    version: &'static str,
    seed_mix_version: u32,
    experiment: &'static str,
    master_seed: u64,
    config: &'a ExperimentConfig,
    tables: Vec<&'a str>,
    pivot_files: Vec<String>,
    density_files: Vec<String>,
    exclusions: &'a [Exclusion],
    warnings: &'a [String],
}

fn write(path: PathBuf, contents: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

/// Writes tables in each requested format, every pivot sample and density
/// curve as CSV, and `manifest.json`, all below `dir`. Returns the paths
/// written.
pub fn emit_report(
    report: &ExperimentReport,
    dir: impl AsRef<Path>,
    formats: &[ReportFormat],
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    for sub in [dir.to_path_buf(), dir.join("pivots"), dir.join("densities")] {
        std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
    }
    let mut written = Vec::new();
    for table in &report.tables {
        for format in formats {
            match format {
                ReportFormat::Csv => {
                    write(dir.join(format!("{}.csv", table.name)), &table.to_csv(), &mut written)?
                }
                ReportFormat::Markdown => write(
                    dir.join(format!("{}.md", table.name)),
                    &table.to_markdown(),
                    &mut written,
                )?,
            }
        }
    }
    let mut pivot_files = Vec::new();
    for (stem, sample) in &report.pivots {
        let rel = format!("pivots/{stem}.csv");
        let path = dir.join(&rel);
        sample.write_csv(&path)?;
        written.push(path);
        pivot_files.push(rel);
    }
    let mut density_files = Vec::new();
    for (stem, curve) in &report.densities {
        let rel = format!("densities/{stem}.csv");
        let path = dir.join(&rel);
        curve.write_csv(&path)?;
        written.push(path);
        density_files.push(rel);
    }
    let manifest = Manifest {
        software: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        seed_mix_version: SEED_MIX_VERSION,
        experiment: report.config.experiment.name(),
        master_seed: report.config.master_seed,
        config: &report.config,
        tables: report.tables.iter().map(|t| t.name.as_str()).collect(),
        pivot_files,
        density_files,
        exclusions: &report.exclusions,
        warnings: &report.warnings,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write(dir.join("manifest.json"), &(json + "\n"), &mut written)?;
    Ok(written)
}
