//! One-dimensional Λ-system Maxwell–Bloch integration of the write, hold and
//! read phases.
//!
//! In normalised position z ∈ [0, 1] and the co-moving time frame the weak
//! probe obeys
//!
//! ```text
//! ∂P/∂t = −γ P + i g E + i (Ω(t)/2) S
//! ∂S/∂t = −Γ_s(t) S + i (Ω(t)/2) P
//! ∂E/∂z = i g P,            g = sqrt(d γ / 2)
//! ```
//!
//! with E normalised so that ∫|E_in|² dt = 1. For Ω = 0 a long weak probe is
//! transmitted with intensity e^(−d), which fixes the optical-depth
//! convention. With these units the excitation ∫|P|² + |S|² dz plus the
//! emitted energy ∫|E_out|² dt is conserved when γ = Γ_s = 0.

mod dump;
mod integrate;
mod optimize;
mod split;

use num_complex::Complex;

use crate::decoherence::DecoherenceModel;
use crate::error::{Error, Result};
use crate::num::Real;
use crate::physics::{AtomSpecies, EnsembleParams};
use crate::pulse::{ControlSchedule, PulseEnvelope, PulseRole};

pub use dump::write_field_dump;
pub use optimize::{optimize_control_amplitude, ControlOptimum};
pub use split::{bisect_split_area, partial_readout_fractions, ReadoutSplit};

/// Discretisation of the solver. Time steps are fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverGrid<T> {
    pub n_z: usize,
    /// s
    pub dt: T,
    /// Polarisation norm below which a control-free interval may be skipped.
    pub abs_tol: T,
    /// Relative slack on the excitation sanity bound.
    pub rel_tol: T,
}

impl<T: Real> SolverGrid<T> {
    pub const MIN_NZ: usize = 32;

    pub fn new(n_z: usize, dt: T) -> Result<Self> {
        if n_z < Self::MIN_NZ {
            return Err(Error::Config(format!("n_z must be >= {}, got {n_z}", Self::MIN_NZ)));
        }
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(Error::Config(format!("dt must be > 0, got {dt}")));
        }
        Ok(Self {
            n_z,
            dt,
            abs_tol: T::lit(1e-10),
            rel_tol: T::lit(1e-6),
        })
    }

    /// Largest admissible step for the given pulses and medium.
    pub fn max_dt(probe: &PulseEnvelope<T>, schedule: &ControlSchedule<T>, species: &AtomSpecies<T>) -> T {
        let mut limit = probe.fwhm / T::lit(20.0);
        let peak = schedule.peak_rabi();
        if peak > T::zero() {
            limit = limit.min(T::TAU() / (T::lit(10.0) * peak));
        }
        if species.excited_decay_rate > T::zero() {
            limit = limit.min(T::one() / (T::lit(10.0) * species.excited_decay_rate));
        }
        limit
    }

    /// Default grid: 128 cells and a fifth of the largest admissible step.
    pub fn auto(probe: &PulseEnvelope<T>, schedule: &ControlSchedule<T>, species: &AtomSpecies<T>) -> Self {
        let dt = Self::max_dt(probe, schedule, species) / T::lit(5.0);
        Self::new(128, dt).expect("auto grid is valid")
    }

    pub fn dz(&self) -> T {
        T::one() / T::lit(self.n_z as f64)
    }

    /// Same grid with dt and dz halved.
    pub fn refined(&self) -> Self {
        Self {
            n_z: self.n_z * 2,
            dt: self.dt / T::lit(2.0),
            ..*self
        }
    }

    fn validate(&self, probe: &PulseEnvelope<T>, schedule: &ControlSchedule<T>, species: &AtomSpecies<T>, ensemble: &EnsembleParams<T>) -> Result<()> {
        let limit = Self::max_dt(probe, schedule, species);
        // slack for values that were themselves derived from the limit
        if self.dt > limit * T::lit(1.0 + 1e-9) {
            return Err(Error::Config(format!(
                "dt = {:e} s does not resolve the pulses and decay (limit {:e} s)",
                self.dt.as_f64(),
                limit.as_f64()
            )));
        }
        let collective = ensemble.optical_depth * species.excited_decay_rate / T::lit(2.0);
        if collective * self.dt > T::one() {
            return Err(Error::Config(format!(
                "dt = {:e} s too coarse for the collective rate d·γ/2 = {:e} /s",
                self.dt.as_f64(),
                collective.as_f64()
            )));
        }
        Ok(())
    }
}

/// Snapshot of the fields across the medium. `e` is sampled at cell
/// centres, like `p` and `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState<T> {
    pub time: T,
    pub e: Vec<Complex<T>>,
    pub p: Vec<Complex<T>>,
    pub s: Vec<Complex<T>>,
}

/// Knobs outside the physical model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationOptions<T> {
    /// Replaces γ in the polarisation damping while leaving the coupling
    /// g = sqrt(dγ/2) unchanged. `Some(0)` gives a lossless medium.
    pub optical_decay_override: Option<T>,
    /// Jump analytically across control-free holds.
    pub hold_shortcut: bool,
    /// Record a [`FieldState`] every this many steps.
    pub record_every: Option<usize>,
}

impl<T: Real> Default for SimulationOptions<T> {
    fn default() -> Self {
        Self {
            optical_decay_override: None,
            hold_shortcut: true,
            record_every: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolverDiagnostics {
    pub steps: usize,
    /// Time skipped by the hold shortcut, s.
    pub skipped_time: f64,
    /// ∫|E_in|² dt as seen by the integrator.
    pub input_energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult<T> {
    /// Start time of every recorded step, s.
    pub times: Vec<T>,
    /// Output field of the controlled mode at z = 1.
    pub e_out: Vec<Complex<T>>,
    /// Input field at z = 0 on the same times.
    pub e_in: Vec<Complex<T>>,
    /// Fraction of input energy leaving during the write window.
    pub transmitted_fraction: T,
    pub efficiency_per_readout: Vec<T>,
    pub residual_spin_norm: T,
    pub residual_optical_norm: T,
    pub spontaneous_loss_fraction: T,
    /// Spin-wave energy removed by the decoherence channels.
    pub decoherence_loss_fraction: T,
    /// ∫|S|² dz when the write window closes (overlap-scaled).
    pub post_write_spin_norm: T,
    /// Fraction of the probe in the controlled mode.
    pub overlap: T,
    /// Window edges: write window ends at `window_edges[0]`, read-out k
    /// spans `window_edges[k]..window_edges[k+1]`.
    pub window_edges: Vec<T>,
    pub write_center: T,
    pub readout_centers: Vec<T>,
    pub control_fwhm: Vec<T>,
    pub probe_center: T,
    pub snapshots: Vec<FieldState<T>>,
    pub diagnostics: SolverDiagnostics,
}

impl<T: Real> SimulationResult<T> {
    pub fn total_efficiency(&self) -> T {
        self.efficiency_per_readout.iter().copied().sum()
    }

    /// Sum of every energy sink; equals 1 up to integration error.
    pub fn bookkeeping_sum(&self) -> T {
        self.transmitted_fraction
            + self.total_efficiency()
            + self.residual_spin_norm
            + self.residual_optical_norm
            + self.spontaneous_loss_fraction
            + self.decoherence_loss_fraction
    }

    /// Detected-mode output intensity at sample `i`: the controlled mode
    /// plus the non-overlapping part of the probe, which passes unaffected.
    pub fn output_intensity(&self, i: usize) -> T {
        let ov = self.overlap;
        (T::one() - ov) * self.e_in[i].norm_sqr() + ov * self.e_out[i].norm_sqr()
    }

    /// Index of the window containing time `t`: 0 for the write window,
    /// k for read-out k.
    pub fn window_of(&self, t: T) -> usize {
        self.window_edges.iter().take_while(|&&e| t >= e).count()
    }

    /// Time of peak output intensity inside read-out window `k` (1-based).
    pub fn recall_peak_time(&self, k: usize) -> Option<T> {
        let mut best: Option<(T, T)> = None;
        for (i, &t) in self.times.iter().enumerate() {
            if self.window_of(t) == k {
                let v = self.e_out[i].norm_sqr();
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((t, v));
                }
            }
        }
        best.map(|(t, _)| t)
    }
}

/// Everything needed for one protocol run.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSetup<T> {
    pub ensemble: EnsembleParams<T>,
    pub species: AtomSpecies<T>,
    pub probe: PulseEnvelope<T>,
    pub schedule: ControlSchedule<T>,
    pub grid: SolverGrid<T>,
    pub decoherence: DecoherenceModel<T>,
    pub options: SimulationOptions<T>,
}

impl<T: Real> ProtocolSetup<T> {
    /// Auto grid, default options.
    pub fn new(
        ensemble: EnsembleParams<T>,
        species: AtomSpecies<T>,
        probe: PulseEnvelope<T>,
        schedule: ControlSchedule<T>,
        decoherence: DecoherenceModel<T>,
    ) -> Self {
        let grid = SolverGrid::auto(&probe, &schedule, &species);
        Self {
            ensemble,
            species,
            probe,
            schedule,
            grid,
            decoherence,
            options: SimulationOptions::default(),
        }
    }

    pub fn run(&self) -> Result<SimulationResult<T>> {
        let probe = self.probe;
        let norm = probe.energy().sqrt();
        simulate_with_input(self, |t| Complex::new(probe.value(t) / norm, T::zero()))
    }
}

/// Runs the write–hold–read sequence for a unit-energy probe.
pub fn simulate_protocol<T: Real>(
    ensemble: &EnsembleParams<T>,
    species: &AtomSpecies<T>,
    probe: &PulseEnvelope<T>,
    schedule: &ControlSchedule<T>,
    grid: &SolverGrid<T>,
    decoherence: &DecoherenceModel<T>,
) -> Result<SimulationResult<T>> {
    ProtocolSetup {
        ensemble: *ensemble,
        species: *species,
        probe: *probe,
        schedule: schedule.clone(),
        grid: *grid,
        decoherence: *decoherence,
        options: SimulationOptions::default(),
    }
    .run()
}

/// Runs the protocol with an arbitrary input field on the probe's support.
/// Fractions are relative to the integrated input energy.
pub fn simulate_with_input<T: Real>(
    setup: &ProtocolSetup<T>,
    input: impl Fn(T) -> Complex<T>,
) -> Result<SimulationResult<T>> {
    if setup.probe.role != PulseRole::Probe {
        return Err(Error::Config("probe envelope must have the probe role".into()));
    }
    setup
        .grid
        .validate(&setup.probe, &setup.schedule, &setup.species, &setup.ensemble)?;
    integrate::run(setup, &input)
}

#[cfg(test)]
pub(crate) mod tests;
