//! Phase matching, spin-wave grating period and control-leakage budget.

use crate::error::{require_finite, Error, Result};
use crate::num::Real;
use crate::physics::SPEED_OF_LIGHT;

/// One stage of control-field extinction between the cloud and the detector.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtinctionStage<T> {
    pub label: String,
    /// dB, non-negative.
    pub db: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamGeometry<T> {
    /// Angle between probe and control, rad.
    pub separation_angle: T,
    /// Probe wavelength, m.
    pub wavelength: T,
    pub write_read_copropagating: bool,
    pub extinction_chain: Vec<ExtinctionStage<T>>,
    /// When set, the control wavenumber is k_probe + 2π·splitting/c instead
    /// of being taken equal to the probe's.
    pub exact_control_splitting: Option<T>,
}

impl<T: Real> BeamGeometry<T> {
    pub fn new(separation_angle: T, wavelength: T, extinction_chain: Vec<ExtinctionStage<T>>) -> Result<Self> {
        require_finite("separation_angle", separation_angle.as_f64())?;
        require_finite("wavelength", wavelength.as_f64())?;
        if separation_angle < T::zero() || separation_angle > T::PI() {
            return Err(Error::Config(format!(
                "separation_angle must lie in [0, π], got {separation_angle}"
            )));
        }
        if wavelength <= T::zero() {
            return Err(Error::Config(format!("wavelength must be > 0, got {wavelength}")));
        }
        for st in &extinction_chain {
            require_finite(&st.label, st.db.as_f64())?;
            if st.db < T::zero() {
                return Err(Error::Config(format!("extinction '{}' must be >= 0 dB", st.label)));
            }
        }
        Ok(Self {
            separation_angle,
            wavelength,
            write_read_copropagating: true,
            extinction_chain,
            exact_control_splitting: None,
        })
    }

    pub fn from_degrees(angle_deg: T, wavelength: T, extinction_chain: Vec<ExtinctionStage<T>>) -> Result<Self> {
        Self::new(angle_deg.to_radians(), wavelength, extinction_chain)
    }

    pub fn total_extinction_db(&self) -> T {
        self.extinction_chain.iter().map(|s| s.db).sum()
    }

    fn probe_k(&self) -> T {
        T::TAU() / self.wavelength
    }

    fn control_k(&self) -> T {
        match self.exact_control_splitting {
            Some(split) => self.probe_k() + T::TAU() * split / T::lit(SPEED_OF_LIGHT),
            None => self.probe_k(),
        }
    }

    /// Probe and write-control wavevectors in the plane of the beams. The
    /// probe runs along +z; the control is rotated by the separation angle.
    pub fn wavevectors(&self) -> ([T; 3], [T; 3]) {
        let kp = self.probe_k();
        let kc = self.control_k();
        let th = self.separation_angle;
        ([T::zero(), T::zero(), kp], [kc * th.sin(), T::zero(), kc * th.cos()])
    }

    pub fn phase_matching(&self) -> PhaseMatching<T> {
        let (ki, kw) = self.wavevectors();
        let kr = if self.write_read_copropagating {
            kw
        } else {
            [-kw[0], -kw[1], -kw[2]]
        };
        let dk = norm(sub(ki, kw));
        let ko = output_wavevector(ki, kw, kr);
        let same = norm(sub(ko, ki)) <= T::lit(1e-12) * norm(ki);
        PhaseMatching {
            delta_k_magnitude: dk,
            grating_period: if dk > T::zero() { T::TAU() / dk } else { T::infinity() },
            output_direction_equals_input: same,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseMatching<T> {
    /// |k_i − k_W|, rad/m.
    pub delta_k_magnitude: T,
    /// κ = 2π/|Δk|, m. Infinite when there is no grating.
    pub grating_period: T,
    pub output_direction_equals_input: bool,
}

/// Spin-wave grating period κ = λ / (2 sin(θ/2)), m.
///
/// Probe and control wavenumbers are taken equal unless the geometry asks
/// for the exact splitting. θ = 0 yields an infinite period.
pub fn grating_period<T: Real>(geometry: &BeamGeometry<T>) -> T {
    if geometry.exact_control_splitting.is_some() {
        return geometry.phase_matching().grating_period;
    }
    let half = geometry.separation_angle / T::lit(2.0);
    let s = half.sin();
    if s <= T::zero() {
        T::infinity()
    } else {
        geometry.wavelength / (T::lit(2.0) * s)
    }
}

fn sub<T: Real>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm<T: Real>(a: [T; 3]) -> T {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// k_o = k_i − k_W + k_R.
pub fn output_wavevector<T: Real>(k_i: [T; 3], k_w: [T; 3], k_r: [T; 3]) -> [T; 3] {
    [
        k_i[0] - k_w[0] + k_r[0],
        k_i[1] - k_w[1] + k_r[1],
        k_i[2] - k_w[2] + k_r[2],
    ]
}

/// Control photons reaching the detector after the extinction chain.
pub fn leakage_photons<T: Real>(control_photons: T, geometry: &BeamGeometry<T>) -> Result<T> {
    if control_photons.is_nan() || control_photons < T::zero() {
        return Err(Error::Domain(format!("control_photons must be >= 0, got {control_photons}")));
    }
    Ok(control_photons * T::lit(10.0).powf(-geometry.total_extinction_db() / T::lit(10.0)))
}
