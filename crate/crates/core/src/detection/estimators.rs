use super::DetectionHistogram;
use crate::error::{require_finite, Error, Result};

/// Counts in bins whose centre lies in `[center - window/2, center + window/2)`.
pub fn window_counts(h: &DetectionHistogram, center: f64, window: f64) -> Result<u64> {
    require_finite("window_center", center)?;
    if !(window > 0.0) || !window.is_finite() {
        return Err(Error::Config(format!("analysis window must be > 0, got {window}")));
    }
    let (lo, hi) = (center - 0.5 * window, center + 0.5 * window);
    let eps = 1e-6 * h.bin_width();
    if lo < h.start() - eps || hi > h.end() + eps {
        return Err(Error::Config(format!(
            "window [{:.3}, {:.3}] ns outside histogram span [{:.3}, {:.3}] ns",
            lo * 1e9,
            hi * 1e9,
            h.start() * 1e9,
            h.end() * 1e9
        )));
    }
    Ok((0..h.n_bins())
        .filter(|&i| {
            let c = h.bin_center(i);
            c >= lo - eps && c < hi - eps
        })
        .map(|i| h.counts[i])
        .sum())
}

/// Detection probability per trial in one window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbabilityEstimate {
    pub counts: u64,
    pub n_trials: u64,
    pub p: f64,
    /// Binomial standard error.
    pub std_err: f64,
    /// 95% one-sided upper bound (3/N) when no counts were seen.
    pub upper_bound: Option<f64>,
}

impl ProbabilityEstimate {
    pub fn from_counts(counts: u64, n_trials: u64) -> Result<Self> {
        if n_trials == 0 {
            return Err(Error::Config("n_trials must be >= 1".into()));
        }
        let n = n_trials as f64;
        let p = counts as f64 / n;
        let pc = p.min(1.0);
        Ok(Self {
            counts,
            n_trials,
            p,
            std_err: (pc * (1.0 - pc) / n).sqrt(),
            upper_bound: (counts == 0).then(|| 3.0 / n),
        })
    }
}

pub fn estimate_probabilities(h: &DetectionHistogram, window_center: f64, window: f64) -> Result<ProbabilityEstimate> {
    ProbabilityEstimate::from_counts(window_counts(h, window_center, window)?, h.n_trials)
}

/// Noise probability per input pulse referred back to the memory output:
/// N₃ / (N·η_t).
pub fn unconditional_noise_probability(n3: f64, n: f64, eta_t: f64) -> Result<f64> {
    require_finite("N_3", n3)?;
    require_finite("N", n)?;
    require_finite("eta_t", eta_t)?;
    if n3 < 0.0 {
        return Err(Error::Domain(format!("N_3 must be >= 0, got {n3}")));
    }
    if !(n > 0.0) {
        return Err(Error::Domain(format!("N must be > 0, got {n}")));
    }
    if !(eta_t > 0.0 && eta_t <= 1.0) {
        return Err(Error::Domain(format!("eta_t must lie in (0, 1], got {eta_t}")));
    }
    Ok(n3 / (n * eta_t))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrFidelity {
    /// (p_s - p_n)/p_n; `f64::INFINITY` when p_n = 0.
    pub snr: f64,
    /// 1 - 1/snr, present when snr >= 1.
    pub fidelity: Option<f64>,
    /// Set when p_s < p_n.
    pub below_noise: bool,
}

impl SnrFidelity {
    pub fn is_infinite(&self) -> bool {
        self.snr.is_infinite()
    }
}

pub fn snr_and_fidelity(p_s: f64, p_n: f64) -> Result<SnrFidelity> {
    require_finite("p_s", p_s)?;
    require_finite("p_n", p_n)?;
    if p_s < 0.0 || p_n < 0.0 {
        return Err(Error::Domain(format!("probabilities must be >= 0, got p_s={p_s}, p_n={p_n}")));
    }
    if p_n == 0.0 {
        return Ok(SnrFidelity { snr: f64::INFINITY, fidelity: Some(1.0), below_noise: false });
    }
    let snr = (p_s - p_n) / p_n;
    Ok(SnrFidelity { snr, fidelity: (snr >= 1.0).then(|| 1.0 - 1.0 / snr), below_noise: p_s < p_n })
}

/// Signal and noise probabilities with propagated errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialStatistics {
    pub p_s: f64,
    pub p_s_err: f64,
    pub p_n: f64,
    pub p_n_err: f64,
    pub snr: f64,
    pub snr_err: f64,
    pub fidelity: Option<f64>,
    pub fidelity_err: Option<f64>,
    pub below_noise: bool,
}

/// Statistics from a full-run histogram and a control-and-atoms histogram,
/// both referred to the memory output by dividing by η_t.
pub fn trial_statistics(
    signal: &DetectionHistogram,
    noise: &DetectionHistogram,
    window_center: f64,
    window: f64,
    eta_t: f64,
) -> Result<TrialStatistics> {
    let s = estimate_probabilities(signal, window_center, window)?;
    let n = estimate_probabilities(noise, window_center, window)?;
    let p_s = unconditional_noise_probability(s.counts as f64, s.n_trials as f64, eta_t)?;
    let p_n = unconditional_noise_probability(n.counts as f64, n.n_trials as f64, eta_t)?;
    let (p_s_err, p_n_err) = (s.std_err / eta_t, n.std_err / eta_t);
    let sf = snr_and_fidelity(p_s, p_n)?;
    let snr_err = if p_n > 0.0 {
        ((p_s_err / p_n).powi(2) + (p_s * p_n_err / (p_n * p_n)).powi(2)).sqrt()
    } else {
        f64::INFINITY
    };
    let fidelity_err = sf.fidelity.map(|_| if sf.snr.is_finite() { snr_err / (sf.snr * sf.snr) } else { 0.0 });
    Ok(TrialStatistics {
        p_s,
        p_s_err,
        p_n,
        p_n_err,
        snr: sf.snr,
        snr_err,
        fidelity: sf.fidelity,
        fidelity_err,
        below_noise: sf.below_noise,
    })
}

/// Window placement for the noise budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseWindows {
    /// s
    pub window: f64,
    /// Recall time, s.
    pub recall_center: f64,
    /// Centre of the shifted write-leakage peak, s.
    pub write_peak_center: f64,
    /// Centre of the shifted read-leakage peak, s.
    pub read_peak_center: f64,
}

/// Counts with a Poisson error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonCount {
    pub counts: u64,
    pub err: f64,
}

impl PoissonCount {
    fn new(counts: u64) -> Self {
        Self { counts, err: (counts as f64).sqrt() }
    }
}

/// Noise counts for configurations I (probe only), II (control only) and
/// III (control and atoms).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseBudget {
    pub n_trials: u64,
    pub n1: PoissonCount,
    pub n2: PoissonCount,
    pub n3: PoissonCount,
    pub n2_write: PoissonCount,
    pub n3_write: PoissonCount,
    pub n2_read: PoissonCount,
    pub n3_read: PoissonCount,
}

impl NoiseBudget {
    pub fn entries(&self) -> [(&'static str, PoissonCount); 7] {
        [
            ("N1", self.n1),
            ("N2", self.n2),
            ("N3", self.n3),
            ("N2_write", self.n2_write),
            ("N3_write", self.n3_write),
            ("N2_read", self.n2_read),
            ("N3_read", self.n3_read),
        ]
    }
}

pub fn noise_budget(
    config_i: &DetectionHistogram,
    config_ii: &DetectionHistogram,
    config_iii: &DetectionHistogram,
    windows: &NoiseWindows,
) -> Result<NoiseBudget> {
    let n = config_i.n_trials;
    if config_ii.n_trials != n || config_iii.n_trials != n {
        return Err(Error::Config(format!(
            "noise budget needs equal trial counts, got {}, {}, {}",
            n, config_ii.n_trials, config_iii.n_trials
        )));
    }
    if !config_i.same_binning(config_ii) || !config_i.same_binning(config_iii) {
        return Err(Error::Config("noise budget needs identical binning".into()));
    }
    let w = windows.window;
    let c = |h, t| window_counts(h, t, w).map(PoissonCount::new);
    Ok(NoiseBudget {
        n_trials: n,
        n1: c(config_i, windows.recall_center)?,
        n2: c(config_ii, windows.recall_center)?,
        n3: c(config_iii, windows.recall_center)?,
        n2_write: c(config_ii, windows.write_peak_center)?,
        n3_write: c(config_iii, windows.write_peak_center)?,
        n2_read: c(config_ii, windows.read_peak_center)?,
        n3_read: c(config_iii, windows.read_peak_center)?,
    })
}
