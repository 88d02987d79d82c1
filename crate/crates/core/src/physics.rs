//! Physical constants, species data and ensemble parameters.
//!
//! Constants are fixed at their CODATA 2018 (exact SI) values.

use crate::error::{require_finite, Error, Result};
use crate::num::Real;

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Planck constant, J s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Mass of a ⁸⁷Rb atom, kg.
pub const RB87_MASS: f64 = 1.443_160_648e-25;
/// ⁸⁷Rb D2 vacuum wavelength, m.
pub const RB87_D2_WAVELENGTH: f64 = 780.241_209_686e-9;
/// ⁸⁷Rb ground-state hyperfine splitting, Hz.
pub const RB87_GROUND_SPLITTING: f64 = 6.834_682_610_904e9;
/// Default amplitude (coherence) decay rate of the excited level, rad/s.
///
/// This is 2π × 3.03 MHz, half of the D2 population decay rate. It is a
/// configurable input, not a measured property of the memory.
pub const DEFAULT_EXCITED_DECAY: f64 = 2.0 * std::f64::consts::PI * 3.03e6;

/// Atomic species of the Λ system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomSpecies<T> {
    /// kg
    pub mass: T,
    /// Probe transition wavelength, m.
    pub transition_wavelength: T,
    /// Ground hyperfine splitting, Hz.
    pub ground_splitting: T,
    /// Amplitude decay rate γ of |e⟩, rad/s.
    pub excited_decay_rate: T,
}

impl<T: Real> AtomSpecies<T> {
    pub fn new(mass: T, transition_wavelength: T, ground_splitting: T, excited_decay_rate: T) -> Result<Self> {
        for (name, v) in [
            ("mass", mass),
            ("transition_wavelength", transition_wavelength),
            ("ground_splitting", ground_splitting),
            ("excited_decay_rate", excited_decay_rate),
        ] {
            require_finite(name, v.as_f64())?;
            if v <= T::zero() {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        let wl = transition_wavelength.as_f64();
        if !(100e-9..10e-6).contains(&wl) {
            return Err(Error::Config(format!(
                "transition_wavelength {wl:e} m outside the 100 nm .. 10 um band"
            )));
        }
        Ok(Self {
            mass,
            transition_wavelength,
            ground_splitting,
            excited_decay_rate,
        })
    }

    /// ⁸⁷Rb on the D2 line with the default excited-state decay rate.
    pub fn rubidium87() -> Self {
        Self {
            mass: T::lit(RB87_MASS),
            transition_wavelength: T::lit(RB87_D2_WAVELENGTH),
            ground_splitting: T::lit(RB87_GROUND_SPLITTING),
            excited_decay_rate: T::lit(DEFAULT_EXCITED_DECAY),
        }
    }

    pub fn with_excited_decay_rate(mut self, gamma: T) -> Result<Self> {
        self.excited_decay_rate = gamma;
        Self::new(self.mass, self.transition_wavelength, self.ground_splitting, gamma)
    }
}

/// The atomic medium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleParams<T> {
    /// Resonant intensity optical depth d: a weak probe transmits e^(-d).
    pub optical_depth: T,
    /// K
    pub temperature: T,
    /// m. Only sets the dimensional scale of the z grid.
    pub medium_length: T,
    /// 1/e lifetime of the efficiency from ambient-field dephasing, s.
    /// `+inf` disables the channel.
    pub magnetic_lifetime: T,
    /// Fraction of the probe that overlaps the controlled region, in [0, 1].
    pub overlap_efficiency: T,
}

impl<T: Real> EnsembleParams<T> {
    pub fn new(
        optical_depth: T,
        temperature: T,
        medium_length: T,
        magnetic_lifetime: T,
        overlap_efficiency: T,
    ) -> Result<Self> {
        for (name, v) in [
            ("optical_depth", optical_depth),
            ("temperature", temperature),
            ("medium_length", medium_length),
            ("overlap_efficiency", overlap_efficiency),
        ] {
            require_finite(name, v.as_f64())?;
        }
        if magnetic_lifetime.is_nan() {
            return Err(Error::Config("magnetic_lifetime must not be NaN".into()));
        }
        if optical_depth < T::zero() {
            return Err(Error::Config(format!("optical_depth must be >= 0, got {optical_depth}")));
        }
        if temperature < T::zero() {
            return Err(Error::Config(format!("temperature must be >= 0, got {temperature}")));
        }
        if medium_length <= T::zero() {
            return Err(Error::Config(format!("medium_length must be > 0, got {medium_length}")));
        }
        if magnetic_lifetime <= T::zero() {
            return Err(Error::Config(format!(
                "magnetic_lifetime must be > 0 (use infinity to disable), got {magnetic_lifetime}"
            )));
        }
        if overlap_efficiency < T::zero() || overlap_efficiency > T::one() {
            return Err(Error::Config(format!(
                "overlap_efficiency must lie in [0, 1], got {overlap_efficiency}"
            )));
        }
        Ok(Self {
            optical_depth,
            temperature,
            medium_length,
            magnetic_lifetime,
            overlap_efficiency,
        })
    }

    /// Ideal medium: no magnetic dephasing, full overlap, 2 mm long.
    pub fn ideal(optical_depth: T, temperature: T) -> Result<Self> {
        Self::new(optical_depth, temperature, T::lit(2e-3), T::infinity(), T::one())
    }
}

/// One-dimensional r.m.s. thermal speed `sqrt(k_B T / m)`, m/s.
pub fn thermal_speed<T: Real>(species: &AtomSpecies<T>, temperature: T) -> Result<T> {
    if temperature.is_nan() || temperature < T::zero() {
        return Err(Error::Domain(format!("temperature must be >= 0, got {temperature}")));
    }
    Ok((T::lit(BOLTZMANN) * temperature / species.mass).sqrt())
}
