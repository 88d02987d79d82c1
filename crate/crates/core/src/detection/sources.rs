//! Expected detection rate per trial as a function of time.

use super::{DetectorModel, TrialConfig};
use crate::error::{Error, Result};
use crate::solver::SimulationResult;

/// Which physical sources are present in a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceFlags {
    pub probe: bool,
    pub atoms: bool,
    pub control: bool,
}

impl SourceFlags {
    /// Configuration I: probe without control or atoms.
    pub const PROBE_ONLY: Self = Self { probe: true, atoms: false, control: false };
    /// Configuration II: control without probe or atoms.
    pub const CONTROL_ONLY: Self = Self { probe: false, atoms: false, control: true };
    /// Configuration III: control and atoms without probe.
    pub const CONTROL_ATOMS: Self = Self { probe: false, atoms: true, control: true };
    /// Full storage and recall.
    pub const FULL: Self = Self { probe: true, atoms: true, control: true };
    pub const NONE: Self = Self { probe: false, atoms: false, control: false };

    fn validate(&self) -> Result<()> {
        if self.probe && self.atoms && !self.control {
            return Err(Error::Config(
                "probe with atoms but no control is not a memory configuration".into(),
            ));
        }
        Ok(())
    }
}

/// Fraction of a unit-area Gaussian (centre `mu`, FWHM `fwhm`) falling in a
/// window of width `window` centred on `center`.
pub fn gaussian_window_fraction(mu: f64, fwhm: f64, center: f64, window: f64) -> f64 {
    let sigma = fwhm / (8.0 * std::f64::consts::LN_2).sqrt();
    let a = ((center - 0.5 * window - mu) / sigma).max(-12.0);
    let b = ((center + 0.5 * window - mu) / sigma).min(12.0);
    if b <= a {
        return 0.0;
    }
    // Simpson on the standard normal density
    let n = 4000;
    let h = (b - a) / n as f64;
    let pdf = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = pdf(a) + pdf(b);
    for i in 1..n {
        s += pdf(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Piecewise-constant expected counts per trial on a uniform fine grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RateProfile {
    /// s
    pub start: f64,
    /// s
    pub cell: f64,
    /// Fine cells per histogram bin.
    pub cells_per_bin: usize,
    /// Expected counts per trial in each cell.
    pub counts: Vec<f64>,
}

impl RateProfile {
    pub fn end(&self) -> f64 {
        self.start + self.cell * self.counts.len() as f64
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len() / self.cells_per_bin
    }

    pub fn bin_width(&self) -> f64 {
        self.cell * self.cells_per_bin as f64
    }

    /// Flat rate over `[start, start + n_bins·bin_width)`.
    pub fn flat(start: f64, bin_width: f64, n_bins: usize, counts_per_bin: f64) -> Self {
        Self { start, cell: bin_width, cells_per_bin: 1, counts: vec![counts_per_bin; n_bins] }
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// Expected counts per trial in [lo, hi), splitting partial cells.
    pub fn expected_between(&self, lo: f64, hi: f64) -> f64 {
        let mut sum = 0.0;
        for (i, c) in self.counts.iter().enumerate() {
            let a = self.start + i as f64 * self.cell;
            let b = a + self.cell;
            let overlap = (hi.min(b) - lo.max(a)).max(0.0);
            sum += c * overlap / self.cell;
        }
        sum
    }

    /// Builds the rate from the enabled sources.
    ///
    /// `memory_efficiency` rescales the recalled part of the simulated output
    /// so that its total equals the given efficiency.
    pub fn build(
        sim: &SimulationResult<f64>,
        detector: &DetectorModel,
        config: &TrialConfig,
        flags: SourceFlags,
        memory_efficiency: Option<f64>,
    ) -> Result<Self> {
        flags.validate()?;
        detector.validate()?;
        config.validate()?;
        let t_first = *sim.times.first().ok_or_else(|| Error::Config("empty simulation".into()))?;
        let t_last = *sim.times.last().expect("non-empty");
        let bw = config.bin_width;
        let start = (t_first / bw).floor() * bw;
        let n_bins = (((t_last - start) / bw).ceil() as usize).max(1);
        let per_bin = ((bw / 0.1e-9).ceil() as usize).max(1);
        let cell = bw / per_bin as f64;
        let n_cells = n_bins * per_bin;
        let mid = |i: usize| start + (i as f64 + 0.5) * cell;
        let mut counts = vec![0.0; n_cells];

        if flags.probe {
            let scale = config.mean_photons_in * detector.downstream_transmission;
            let recall_scale = match memory_efficiency {
                Some(eta) => {
                    if !(0.0..=1.0).contains(&eta) {
                        return Err(Error::Config(format!("memory efficiency override {eta} outside [0, 1]")));
                    }
                    let sim_eta = sim.total_efficiency();
                    if sim_eta > 0.0 {
                        eta / sim_eta
                    } else {
                        return Err(Error::Config("cannot rescale a simulation with zero recall".into()));
                    }
                }
                None => 1.0,
            };
            let intensity = |k: usize| -> f64 {
                if flags.atoms {
                    let v = sim.output_intensity(k);
                    if sim.window_of(sim.times[k]) > 0 {
                        v * recall_scale
                    } else {
                        v
                    }
                } else {
                    sim.e_in[k].norm_sqr()
                }
            };
            let max_gap = sim
                .times
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::INFINITY, f64::min)
                * 1.5;
            let mut k = 0usize;
            for (i, c) in counts.iter_mut().enumerate() {
                let t = mid(i);
                while k + 1 < sim.times.len() && sim.times[k + 1] <= t {
                    k += 1;
                }
                if t < sim.times[0] || k + 1 >= sim.times.len() {
                    continue;
                }
                let (t0, t1) = (sim.times[k], sim.times[k + 1]);
                if t1 - t0 > max_gap {
                    continue;
                }
                let f = (t - t0) / (t1 - t0);
                let v = intensity(k) * (1.0 - f) + intensity(k + 1) * f;
                *c += scale * v * cell;
            }
        }

        let mut add_bump = |center: f64, fwhm: f64, area: f64| {
            if area <= 0.0 {
                return;
            }
            let sigma = fwhm / (8.0 * std::f64::consts::LN_2).sqrt();
            let norm = area * cell / (sigma * (2.0 * std::f64::consts::PI).sqrt());
            for (i, c) in counts.iter_mut().enumerate() {
                let x = (mid(i) - center) / sigma;
                if x.abs() < 10.0 {
                    *c += norm * (-0.5 * x * x).exp();
                }
            }
        };
        if flags.control {
            let off = detector.leakage_time_offset;
            let spread = detector.leakage_spread_fwhm;
            add_bump(sim.write_center + off, spread, detector.leakage_write);
            for &rc in &sim.readout_centers {
                add_bump(rc + off, spread, detector.leakage_read);
            }
            if flags.atoms {
                for (k, &rc) in sim.readout_centers.iter().enumerate() {
                    let fwhm = sim.control_fwhm.get(k + 1).copied().unwrap_or(spread);
                    add_bump(rc, fwhm, detector.atom_noise_read);
                }
            }
        }

        let dark = detector.dark_ambient_rate * cell;
        if dark > 0.0 {
            for c in counts.iter_mut() {
                *c += dark;
            }
        }
        Ok(Self { start, cell, cells_per_bin: per_bin, counts })
    }
}
