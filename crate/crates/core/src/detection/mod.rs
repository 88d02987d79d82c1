//! Monte Carlo photon counting over repeated storage-and-recall trials, and
//! the estimators used to turn detection histograms into probabilities,
//! signal-to-noise ratios and noise budgets.

mod estimators;
mod io;
mod sources;
mod trials;

pub use estimators::{
    estimate_probabilities, noise_budget, snr_and_fidelity, trial_statistics, unconditional_noise_probability,
    window_counts, NoiseBudget, NoiseWindows, PoissonCount, ProbabilityEstimate, SnrFidelity, TrialStatistics,
};
pub use io::{histogram_csv, histogram_from_events, read_events, write_histogram_csv};
pub use sources::{gaussian_window_fraction, RateProfile, SourceFlags};
pub use trials::{run_trials, run_trials_with_profile};

use crate::error::{require_finite, Error, Result};

/// Everything between the memory output and the time tagger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    /// End-to-end transmission after the memory including detector efficiency.
    pub downstream_transmission: f64,
    /// Dark and ambient counts, 1/s.
    pub dark_ambient_rate: f64,
    /// Expected stray control counts per trial from the write pulse.
    pub leakage_write: f64,
    /// Expected stray control counts per trial from each read-out pulse.
    pub leakage_read: f64,
    /// Shift of the leakage peaks relative to the control centre, s.
    pub leakage_time_offset: f64,
    /// FWHM of the leakage peaks, s.
    pub leakage_spread_fwhm: f64,
    /// Extra counts per trial at each read-out when atoms are present
    /// (without probe). Zero makes configurations II and III identical.
    pub atom_noise_read: f64,
}

/// Counts used to calibrate the detector noise, all for the same number of
/// trials and analysis window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseCalibration {
    pub n_trials: f64,
    /// s
    pub window: f64,
    /// s
    pub control_fwhm: f64,
    /// s, relative to the control centre
    pub leakage_offset: f64,
    /// Background without control or atoms, recall window.
    pub background: f64,
    /// Control without atoms, recall window.
    pub control_recall: f64,
    /// Control without atoms, window centred on the shifted read peak.
    pub control_read_peak: f64,
    /// Control without atoms, window centred on the shifted write peak.
    pub control_write_peak: f64,
    /// Control with atoms, recall window.
    pub atoms_recall: f64,
}

impl NoiseCalibration {
    /// Noise counts of the 20-ns, N = 1.1×10⁶ measurement.
    pub const PUBLISHED: Self = Self {
        n_trials: 1.1e6,
        window: 30e-9,
        control_fwhm: 20e-9,
        leakage_offset: -24e-9,
        background: 5.0,
        control_recall: 22.0,
        control_read_peak: 31.0,
        control_write_peak: 41.0,
        atoms_recall: 36.0,
    };
}

impl DetectorModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("downstream_transmission", self.downstream_transmission),
            ("dark_ambient_rate", self.dark_ambient_rate),
            ("leakage_write", self.leakage_write),
            ("leakage_read", self.leakage_read),
            ("leakage_time_offset", self.leakage_time_offset),
            ("leakage_spread_fwhm", self.leakage_spread_fwhm),
            ("atom_noise_read", self.atom_noise_read),
        ] {
            require_finite(name, v)?;
        }
        if !(self.downstream_transmission > 0.0 && self.downstream_transmission <= 1.0) {
            return Err(Error::Config(format!(
                "downstream_transmission must lie in (0, 1], got {}",
                self.downstream_transmission
            )));
        }
        for (name, v) in [
            ("dark_ambient_rate", self.dark_ambient_rate),
            ("leakage_write", self.leakage_write),
            ("leakage_read", self.leakage_read),
            ("atom_noise_read", self.atom_noise_read),
        ] {
            if v < 0.0 {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.leakage_spread_fwhm <= 0.0 {
            return Err(Error::Config("leakage_spread_fwhm must be > 0".into()));
        }
        Ok(())
    }

    /// Detector with no noise sources at all.
    pub fn noiseless(downstream_transmission: f64) -> Self {
        Self {
            downstream_transmission,
            dark_ambient_rate: 0.0,
            leakage_write: 0.0,
            leakage_read: 0.0,
            leakage_time_offset: 0.0,
            leakage_spread_fwhm: 20e-9,
            atom_noise_read: 0.0,
        }
    }

    /// Solves for the noise parameters that reproduce the calibration counts.
    ///
    /// The leakage spread is fixed by the ratio of read-leakage counts in the
    /// recall window to those in the window centred on the shifted peak; the
    /// atom-induced noise is a peak at the read-out centre with the control
    /// FWHM.
    pub fn calibrate(cal: &NoiseCalibration, downstream_transmission: f64) -> Result<Self> {
        let n = cal.n_trials;
        let w = cal.window;
        let off = cal.leakage_offset;
        let recall = cal.control_recall - cal.background;
        let peak = cal.control_read_peak - cal.background;
        if !(recall > 0.0 && peak > recall) {
            return Err(Error::Config(
                "calibration needs background < control_recall < control_read_peak".into(),
            ));
        }
        let target = recall / peak;
        let ratio = |fwhm: f64| {
            gaussian_window_fraction(off, fwhm, 0.0, w) / gaussian_window_fraction(off, fwhm, off, w)
        };
        // the ratio grows monotonically with the spread
        let (mut lo, mut hi) = (1e-10, 1e-6);
        if !(ratio(lo) < target && ratio(hi) > target) {
            return Err(Error::Config("leakage spread not bracketed by 0.1 ns .. 1 us".into()));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if ratio(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let spread = 0.5 * (lo + hi);
        let f_peak = gaussian_window_fraction(off, spread, off, w);
        let f_atom = gaussian_window_fraction(0.0, cal.control_fwhm, 0.0, w);
        let model = Self {
            downstream_transmission,
            dark_ambient_rate: cal.background / (n * w),
            leakage_write: (cal.control_write_peak - cal.background) / (n * f_peak),
            leakage_read: peak / (n * f_peak),
            leakage_time_offset: off,
            leakage_spread_fwhm: spread,
            atom_noise_read: ((cal.atoms_recall - cal.control_recall) / (n * f_atom)).max(0.0),
        };
        model.validate()?;
        Ok(model)
    }

    /// Calibrated to the published noise counts with η_t = 0.1.
    pub fn published_calibration() -> Self {
        Self::calibrate(&NoiseCalibration::PUBLISHED, 0.1).expect("published counts calibrate")
    }
}

/// Monte Carlo settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialConfig {
    pub n_trials: u64,
    pub mean_photons_in: f64,
    /// s
    pub bin_width: f64,
    /// Analysis window Δt centred on the recall time, s.
    pub analysis_window: f64,
    pub rng_seed: u64,
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::Config("n_trials must be >= 1".into()));
        }
        require_finite("mean_photons_in", self.mean_photons_in)?;
        if self.mean_photons_in < 0.0 {
            return Err(Error::Config("mean_photons_in must be >= 0".into()));
        }
        if !(self.bin_width > 0.0) || !self.bin_width.is_finite() {
            return Err(Error::Config("bin_width must be > 0".into()));
        }
        if !(self.analysis_window >= self.bin_width) || !self.analysis_window.is_finite() {
            return Err(Error::Config("analysis_window must be >= bin_width".into()));
        }
        Ok(())
    }
}

/// Binned detection times accumulated over `n_trials` trials.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectionHistogram {
    /// Bin edges in integer picoseconds, so equality is exact.
    edges_ps: Vec<i64>,
    pub counts: Vec<u64>,
    pub n_trials: u64,
}

impl DetectionHistogram {
    /// Uniform bins of `bin_width` starting at `start` (seconds).
    pub fn uniform(start: f64, bin_width: f64, n_bins: usize, n_trials: u64) -> Self {
        let s = (start * 1e12).round() as i64;
        let w = (bin_width * 1e12).round() as i64;
        Self {
            edges_ps: (0..=n_bins as i64).map(|i| s + i * w).collect(),
            counts: vec![0; n_bins],
            n_trials,
        }
    }

    pub fn bin_edges(&self) -> Vec<f64> {
        self.edges_ps.iter().map(|&e| e as f64 * 1e-12).collect()
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn start(&self) -> f64 {
        self.edges_ps[0] as f64 * 1e-12
    }

    pub fn end(&self) -> f64 {
        *self.edges_ps.last().expect("at least one edge") as f64 * 1e-12
    }

    pub fn bin_width(&self) -> f64 {
        (self.edges_ps[1] - self.edges_ps[0]) as f64 * 1e-12
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        0.5 * (self.edges_ps[i] + self.edges_ps[i + 1]) as f64 * 1e-12
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Bin holding time `t` (seconds), if inside the span.
    pub fn bin_of(&self, t: f64) -> Option<usize> {
        let ps = (t * 1e12).floor() as i64;
        if ps < self.edges_ps[0] || ps >= *self.edges_ps.last()? {
            return None;
        }
        let w = self.edges_ps[1] - self.edges_ps[0];
        Some(((ps - self.edges_ps[0]) / w) as usize).filter(|&i| i < self.counts.len())
    }

    pub fn same_binning(&self, other: &Self) -> bool {
        self.edges_ps == other.edges_ps
    }

    /// Adds another histogram with the same binning (trials add up).
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if !self.same_binning(other) {
            return Err(Error::Config("cannot merge histograms with different binning".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.n_trials += other.n_trials;
        Ok(())
    }
}

#[cfg(test)]
mod tests;
