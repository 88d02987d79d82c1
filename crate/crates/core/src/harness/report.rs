use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::scenario::Scenario;
use crate::detection::{histogram_csv, DetectionHistogram};
use crate::error::{Error, Result};

/// Fixed numeric format for every report value.
pub fn fmt_value(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.10e}")
    }
}

/// Named numeric table, one row per sweep point in sweep order.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ReportTable {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.iter().map(|&x| fmt_value(x)).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub seed: u64,
    pub version: &'static str,
    /// SHA-256 of the canonical scenario text with the effective seed.
    pub config_hash: String,
}

impl Provenance {
    pub fn for_scenario(scenario: &Scenario) -> Self {
        let digest = Sha256::digest(scenario.to_toml_string().as_bytes());
        let config_hash = digest.iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        });
        Self { seed: scenario.seed, version: env!("CARGO_PKG_VERSION"), config_hash }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub scenario: Scenario,
    pub metrics: Vec<(String, f64)>,
    pub tables: Vec<ReportTable>,
    pub histograms: Vec<(String, DetectionHistogram)>,
    /// Flags and warnings raised while running.
    pub notes: Vec<String>,
    pub solver_steps: usize,
    pub wall_clock_s: f64,
    pub provenance: Provenance,
}

impl RunReport {
    pub fn metric(&self, key: &str) -> Option<f64> {
        self.metrics.iter().find(|(k, _)| k == key).map(|&(_, v)| v)
    }

    pub fn table(&self, name: &str) -> Option<&ReportTable> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn histogram(&self, name: &str) -> Option<&DetectionHistogram> {
        self.histograms.iter().find(|(n, _)| n == name).map(|(_, h)| h)
    }

    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("key,value\n");
        for (k, v) in &self.metrics {
            let _ = writeln!(out, "{k},{}", fmt_value(*v));
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario: {} ({})", self.scenario.name, self.scenario.kind.as_str());
        if let Some(d) = &self.scenario.description {
            let _ = writeln!(s, "{d}");
        }
        let _ = writeln!(s, "seed: {}", self.provenance.seed);
        let _ = writeln!(s, "version: {}", self.provenance.version);
        let _ = writeln!(s, "config sha256: {}", self.provenance.config_hash);
        let _ = writeln!(s, "wall clock: {:.3} s", self.wall_clock_s);
        let _ = writeln!(s, "solver steps: {}", self.solver_steps);
        let _ = writeln!(s, "\nmetrics:");
        let width = self.metrics.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in &self.metrics {
            let _ = writeln!(s, "  {k:<width$}  {v:.6}");
        }
        for t in &self.tables {
            let _ = writeln!(s, "\n{} ({} rows): {}", t.name, t.rows.len(), t.columns.join(", "));
        }
        if !self.notes.is_empty() {
            let _ = writeln!(s, "\nnotes:");
            for n in &self.notes {
                let _ = writeln!(s, "  - {n}");
            }
        }
        s
    }

    /// Writes every report file into `dir` and returns their paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut files: Vec<(String, String)> = vec![
            ("metrics.csv".into(), self.metrics_csv()),
            ("scenario.toml".into(), self.scenario.to_toml_string()),
            (
                "provenance.txt".into(),
                format!(
                    "seed={}\nversion={}\nconfig_sha256={}\n",
                    self.provenance.seed, self.provenance.version, self.provenance.config_hash
                ),
            ),
            ("summary.txt".into(), self.summary()),
        ];
        for t in &self.tables {
            files.push((format!("{}.csv", t.name), t.to_csv()));
        }
        for (name, h) in &self.histograms {
            files.push((format!("hist_{name}.csv"), histogram_csv(h)));
        }
        let mut paths = Vec::with_capacity(files.len());
        for (name, body) in files {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
            paths.push(p);
        }
        Ok(paths)
    }
}
