use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceRow {
    pub key: String,
    pub value: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub key: String,
    pub reference: f64,
    pub sigma: f64,
    pub simulated: Option<f64>,
    pub z: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub threshold: f64,
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn missing(&self) -> Vec<&str> {
        self.rows.iter().filter(|r| r.simulated.is_none()).map(|r| r.key.as_str()).collect()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            let line = match (r.simulated, r.z) {
                (Some(s), Some(z)) => format!(
                    "{} {}: simulated {s:.6} vs {:.6} ± {:.6}, z = {z:+.2}",
                    if r.pass { "PASS" } else { "FAIL" },
                    r.key,
                    r.reference,
                    r.sigma
                ),
                _ => format!("FAIL {}: missing from report", r.key),
            };
            out.push_str(&line);
            out.push('\n');
        }
        out
    }
}

/// z = (simulated - reference)/σ; a row passes iff |z| <= threshold. With
/// σ = 0 only an exact match passes.
pub fn compare_to_reference(metrics: &[(String, f64)], reference: &[ReferenceRow], threshold: f64) -> Comparison {
    let rows = reference
        .iter()
        .map(|r| {
            let simulated = metrics.iter().find(|(k, _)| *k == r.key).map(|&(_, v)| v);
            let z = simulated.map(|s| {
                let d = s - r.value;
                if r.sigma > 0.0 {
                    d / r.sigma
                } else if d == 0.0 {
                    0.0
                } else {
                    d.signum() * f64::INFINITY
                }
            });
            let pass = z.is_some_and(|z| z.abs() <= threshold);
            ComparisonRow { key: r.key.clone(), reference: r.value, sigma: r.sigma, simulated, z, pass }
        })
        .collect();
    Comparison { threshold, rows }
}

fn read_csv_rows(path: &Path, want: usize) -> Result<Vec<Vec<String>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (i == 0 && line.starts_with("key,")) {
            continue;
        }
        let cells: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
        if cells.len() != want {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                detail: format!("line {}: expected {want} columns, got {}", i + 1, cells.len()),
            });
        }
        rows.push(cells);
    }
    Ok(rows)
}

fn number(path: &Path, s: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::Parse { path: path.to_path_buf(), detail: format!("not a number: {s:?}") })
}

/// `key,value,sigma` rows.
pub fn read_reference(path: &Path) -> Result<Vec<ReferenceRow>> {
    read_csv_rows(path, 3)?
        .into_iter()
        .map(|c| {
            let sigma = number(path, &c[2])?;
            if sigma < 0.0 {
                return Err(Error::Parse { path: path.to_path_buf(), detail: format!("{}: negative sigma", c[0]) });
            }
            Ok(ReferenceRow { key: c[0].clone(), value: number(path, &c[1])?, sigma })
        })
        .collect()
}

/// Reads `metrics.csv`, given either the file or the report directory.
pub fn read_metrics(path: &Path) -> Result<Vec<(String, f64)>> {
    let file = if path.is_dir() { path.join("metrics.csv") } else { path.to_path_buf() };
    read_csv_rows(&file, 2)?.into_iter().map(|c| Ok((c[0].clone(), number(&file, &c[1])?))).collect()
}
