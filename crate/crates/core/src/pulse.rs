//! Time-domain envelopes for the probe and control fields.
//!
//! Control envelopes carry a Rabi frequency in rad/s and have a pulse area.
//! Probe envelopes are dimensionless field amplitudes; the solver normalises
//! them to unit energy, so photon number only enters at the detection stage.

use crate::error::{require_finite, Error, Result};
use crate::num::{gaussian_area_factor, Real};
use crate::physics::{PLANCK, SPEED_OF_LIGHT};

/// Envelopes vanish beyond this many FWHM from their centre.
pub const TRUNCATION_FWHM: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PulseShape {
    Gaussian,
    Square,
}

/// Which field an envelope describes. Units of `peak_amplitude` follow the role.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseRole {
    Probe,
    Control,
}

/// What the quoted probe FWHM refers to. Control FWHM always refers to the
/// Rabi frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FwhmConvention {
    /// FWHM of |E|², the power profile seen on a photodiode.
    #[default]
    Intensity,
    /// FWHM of |E|.
    Amplitude,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseEnvelope<T> {
    pub shape: PulseShape,
    pub role: PulseRole,
    /// s
    pub fwhm: T,
    /// s
    pub center_time: T,
    /// Peak Rabi frequency (rad/s) for control, peak field amplitude for probe.
    pub peak_amplitude: T,
    pub convention: FwhmConvention,
}

impl<T: Real> PulseEnvelope<T> {
    fn build(
        role: PulseRole,
        shape: PulseShape,
        fwhm: T,
        center_time: T,
        peak_amplitude: T,
        convention: FwhmConvention,
    ) -> Result<Self> {
        require_finite("fwhm", fwhm.as_f64())?;
        require_finite("center_time", center_time.as_f64())?;
        require_finite("peak_amplitude", peak_amplitude.as_f64())?;
        if fwhm <= T::zero() {
            return Err(Error::Config(format!("pulse fwhm must be > 0, got {fwhm}")));
        }
        if peak_amplitude < T::zero() {
            return Err(Error::Config(format!(
                "pulse peak_amplitude must be >= 0, got {peak_amplitude}"
            )));
        }
        Ok(Self {
            shape,
            role,
            fwhm,
            center_time,
            peak_amplitude,
            convention,
        })
    }

    /// A control pulse with peak Rabi frequency `peak_rabi` (rad/s).
    pub fn control(shape: PulseShape, fwhm: T, center_time: T, peak_rabi: T) -> Result<Self> {
        Self::build(PulseRole::Control, shape, fwhm, center_time, peak_rabi, FwhmConvention::Amplitude)
    }

    /// A control pulse whose peak is calibrated to the given area (rad).
    pub fn control_with_area(shape: PulseShape, fwhm: T, center_time: T, area: T) -> Result<Self> {
        let peak = calibrate_peak_for_area(shape, fwhm, area)?;
        Self::control(shape, fwhm, center_time, peak)
    }

    /// A unit-peak probe pulse.
    pub fn probe(shape: PulseShape, fwhm: T, center_time: T, convention: FwhmConvention) -> Result<Self> {
        Self::build(PulseRole::Probe, shape, fwhm, center_time, T::one(), convention)
    }

    /// FWHM of the quantity that is Gaussian with `exp(-4 ln2 t²/w²)` in the
    /// amplitude: equals `fwhm` for control and amplitude-convention probes,
    /// `sqrt(2) fwhm` for intensity-convention probes.
    fn amplitude_fwhm(&self) -> T {
        match (self.role, self.convention, self.shape) {
            (PulseRole::Probe, FwhmConvention::Intensity, PulseShape::Gaussian) => self.fwhm * T::SQRT_2(),
            _ => self.fwhm,
        }
    }

    /// Half-width of the non-zero support.
    pub fn half_support(&self) -> T {
        T::lit(TRUNCATION_FWHM) * self.fwhm.max(self.amplitude_fwhm())
    }

    /// Start and end of the non-zero support.
    pub fn support(&self) -> (T, T) {
        let h = self.half_support();
        (self.center_time - h, self.center_time + h)
    }

    /// Envelope value at `t`: Rabi frequency for control, field amplitude for probe.
    pub fn value(&self, t: T) -> T {
        let x = t - self.center_time;
        if x.abs() > self.half_support() {
            return T::zero();
        }
        match self.shape {
            PulseShape::Gaussian => {
                let w = self.amplitude_fwhm();
                self.peak_amplitude * (-T::lit(4.0) * T::LN_2() * x * x / (w * w)).exp()
            }
            PulseShape::Square => {
                if x.abs() <= self.fwhm / T::lit(2.0) {
                    self.peak_amplitude
                } else {
                    T::zero()
                }
            }
        }
    }

    /// ∫ value(t)² dt.
    pub fn energy(&self) -> T {
        let p2 = self.peak_amplitude * self.peak_amplitude;
        match self.shape {
            // exp(-8 ln2 x²/w²) has FWHM w/sqrt(2)
            PulseShape::Gaussian => p2 * self.amplitude_fwhm() / T::SQRT_2() * gaussian_area_factor::<T>(),
            PulseShape::Square => p2 * self.fwhm,
        }
    }

    /// ∫ Ω(t) dt in radians. Only defined for control envelopes.
    pub fn pulse_area(&self) -> Result<T> {
        if self.role != PulseRole::Control {
            return Err(Error::Config("pulse_area is only defined for control envelopes".into()));
        }
        Ok(self.peak_amplitude * self.fwhm * shape_area_factor(self.shape))
    }

    /// Returns a copy with the peak scaled to give `area`.
    pub fn with_area(&self, area: T) -> Result<Self> {
        if self.role != PulseRole::Control {
            return Err(Error::Config("with_area is only defined for control envelopes".into()));
        }
        let mut out = *self;
        out.peak_amplitude = calibrate_peak_for_area(self.shape, self.fwhm, area)?;
        Ok(out)
    }
}

fn shape_area_factor<T: Real>(shape: PulseShape) -> T {
    match shape {
        PulseShape::Gaussian => gaussian_area_factor(),
        PulseShape::Square => T::one(),
    }
}

/// Peak Rabi frequency (rad/s) giving pulse area `target` (rad).
pub fn calibrate_peak_for_area<T: Real>(shape: PulseShape, fwhm: T, target: T) -> Result<T> {
    if !(fwhm > T::zero()) || !fwhm.is_finite() {
        return Err(Error::Config(format!("fwhm must be > 0, got {fwhm}")));
    }
    if !(target > T::zero()) || !target.is_finite() {
        return Err(Error::Config(format!("target area must be > 0, got {target}")));
    }
    Ok(target / (fwhm * shape_area_factor::<T>(shape)))
}

/// Photons in a pulse of the given peak power (W) and power FWHM (s).
pub fn photons_per_pulse<T: Real>(peak_power: T, fwhm: T, wavelength: T, shape: PulseShape) -> Result<T> {
    if peak_power < T::zero() || !(fwhm > T::zero()) || !(wavelength > T::zero()) {
        return Err(Error::Domain(format!(
            "photons_per_pulse needs power >= 0, fwhm > 0, wavelength > 0 (got {peak_power}, {fwhm}, {wavelength})"
        )));
    }
    let energy = peak_power * fwhm * shape_area_factor::<T>(shape);
    let photon = T::lit(PLANCK * SPEED_OF_LIGHT) / wavelength;
    Ok(energy / photon)
}

/// One read-out pulse and the area it was calibrated to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Readout<T> {
    pub envelope: PulseEnvelope<T>,
    /// rad
    pub target_area: T,
}

/// Write pulse followed by one or more read-out pulses.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule<T> {
    pub write: PulseEnvelope<T>,
    pub readouts: Vec<Readout<T>>,
}

impl<T: Real> ControlSchedule<T> {
    /// Checks ordering, area bounds, and that the last read-out is a 2π pulse.
    pub fn new(write: PulseEnvelope<T>, readouts: Vec<Readout<T>>) -> Result<Self> {
        let s = Self::relaxed(write, readouts)?;
        let last = s.readouts.last().expect("relaxed checks non-empty").target_area;
        let two_pi = T::TAU();
        if ((last - two_pi) / two_pi).abs() > T::lit(1e-9) {
            return Err(Error::Config(format!(
                "final read-out must have area 2π, got {last} rad"
            )));
        }
        Ok(s)
    }

    /// Like [`ControlSchedule::new`] but without the final-2π rule or the
    /// 2π upper bound, and allowing zero-area (switched off) pulses; used
    /// when calibrating the control amplitude.
    pub fn relaxed(write: PulseEnvelope<T>, readouts: Vec<Readout<T>>) -> Result<Self> {
        if write.role != PulseRole::Control || readouts.iter().any(|r| r.envelope.role != PulseRole::Control) {
            return Err(Error::Config("schedule pulses must be control envelopes".into()));
        }
        if readouts.is_empty() {
            return Err(Error::Config("schedule needs at least one read-out".into()));
        }
        let mut prev = write.center_time;
        for (i, r) in readouts.iter().enumerate() {
            if r.envelope.center_time <= prev {
                return Err(Error::Config(format!(
                    "read-out {i} centre {} s is not after the previous pulse ({} s)",
                    r.envelope.center_time, prev
                )));
            }
            prev = r.envelope.center_time;
            if !(r.target_area >= T::zero()) {
                return Err(Error::Config(format!("read-out {i} area must be >= 0")));
            }
        }
        let s = Self { write, readouts };
        Ok(s)
    }

    /// Gaussian write and read-outs of common FWHM, calibrated to the areas.
    pub fn gaussian(fwhm: T, write_center: T, write_area: T, readouts: &[(T, T)]) -> Result<Self> {
        let write = PulseEnvelope::control_with_area(PulseShape::Gaussian, fwhm, write_center, write_area)?;
        let rs = readouts
            .iter()
            .map(|&(c, a)| {
                if a > T::TAU() * (T::one() + T::lit(1e-12)) {
                    return Err(Error::Config(format!("read-out area {a} exceeds 2π")));
                }
                Ok(Readout {
                    envelope: PulseEnvelope::control_with_area(PulseShape::Gaussian, fwhm, c, a)?,
                    target_area: a,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(write, rs)
    }

    /// Every pulse in time order.
    pub fn pulses(&self) -> impl Iterator<Item = &PulseEnvelope<T>> {
        std::iter::once(&self.write).chain(self.readouts.iter().map(|r| &r.envelope))
    }

    /// Total Rabi frequency at `t`.
    pub fn rabi(&self, t: T) -> T {
        self.pulses().map(|p| p.value(t)).fold(T::zero(), |a, b| a + b)
    }

    pub fn peak_rabi(&self) -> T {
        self.pulses().map(|p| p.peak_amplitude).fold(T::zero(), T::max)
    }

    /// Copy with every pulse set to the same peak Rabi frequency.
    pub fn with_uniform_peak(&self, peak: T) -> Result<Self> {
        let mut write = self.write;
        write.peak_amplitude = peak;
        let readouts = self
            .readouts
            .iter()
            .map(|r| {
                let mut env = r.envelope;
                env.peak_amplitude = peak;
                Ok(Readout {
                    envelope: env,
                    target_area: env.pulse_area()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::relaxed(write, readouts)
    }

    /// Copy with the read-out areas replaced.
    pub fn with_readout_areas(&self, areas: &[T]) -> Result<Self> {
        if areas.len() != self.readouts.len() {
            return Err(Error::Config(format!(
                "expected {} read-out areas, got {}",
                self.readouts.len(),
                areas.len()
            )));
        }
        let readouts = self
            .readouts
            .iter()
            .zip(areas)
            .map(|(r, &a)| {
                Ok(Readout {
                    envelope: r.envelope.with_area(a)?,
                    target_area: a,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.write, readouts)
    }
}
