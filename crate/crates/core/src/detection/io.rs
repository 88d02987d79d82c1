use std::fmt::Write as _;
use std::path::Path;

use super::DetectionHistogram;
use crate::error::{Error, Result};

/// Columnar text with `bin_start_ns,bin_end_ns,counts,counts_per_trial`.
pub fn histogram_csv(h: &DetectionHistogram) -> String {
    let edges = h.bin_edges();
    let mut out = String::from("bin_start_ns,bin_end_ns,counts,counts_per_trial\n");
    let n = h.n_trials.max(1) as f64;
    for (i, &c) in h.counts.iter().enumerate() {
        let _ = writeln!(out, "{:.3},{:.3},{},{:.10e}", edges[i] * 1e9, edges[i + 1] * 1e9, c, c as f64 / n);
    }
    out
}

pub fn write_histogram_csv(h: &DetectionHistogram, path: &Path) -> Result<()> {
    std::fs::write(path, histogram_csv(h)).map_err(|e| Error::io(path, e))
}

/// Reads detection timestamps, one per line in ns. Blank lines and lines
/// starting with `#` are skipped. Returns seconds.
pub fn read_events(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            detail: format!("line {}: not a number: {line:?}", lineno + 1),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse { path: path.to_path_buf(), detail: format!("line {}: non-finite", lineno + 1) });
        }
        out.push(v * 1e-9);
    }
    Ok(out)
}

/// Bins external timestamps (seconds); events outside the span are dropped.
pub fn histogram_from_events(
    events: &[f64],
    start: f64,
    bin_width: f64,
    n_bins: usize,
    n_trials: u64,
) -> Result<DetectionHistogram> {
    if !(bin_width > 0.0) || n_bins == 0 || n_trials == 0 {
        return Err(Error::Config("need bin_width > 0, n_bins >= 1 and n_trials >= 1".into()));
    }
    let mut h = DetectionHistogram::uniform(start, bin_width, n_bins, n_trials);
    for &t in events {
        if let Some(i) = h.bin_of(t) {
            h.counts[i] += 1;
        }
    }
    Ok(h)
}
