//! Temporal beam splitting with several partial read-out pulses.

use super::ProtocolSetup;
use crate::error::{Error, Result};
use crate::num::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutSplit<T> {
    /// Recall efficiency of every read-out bin.
    pub fractions: Vec<T>,
    pub post_write_spin_norm: T,
    pub residual_spin_norm: T,
}

impl<T: Real> ReadoutSplit<T> {
    /// Residual spin relative to the spin stored after the write pulse.
    pub fn residual_ratio(&self) -> T {
        if self.post_write_spin_norm > T::zero() {
            self.residual_spin_norm / self.post_write_spin_norm
        } else {
            T::zero()
        }
    }
}

/// Recall efficiencies for the given read-out areas (rad), the last being 2π.
pub fn partial_readout_fractions<T: Real>(setup: &ProtocolSetup<T>, areas: &[T]) -> Result<ReadoutSplit<T>> {
    let mut s = setup.clone();
    s.schedule = setup.schedule.with_readout_areas(areas)?;
    let r = s.run()?;
    Ok(ReadoutSplit {
        fractions: r.efficiency_per_readout.clone(),
        post_write_spin_norm: r.post_write_spin_norm,
        residual_spin_norm: r.residual_spin_norm,
    })
}

/// Bisects the first of two read-out areas so that the first bin carries
/// `target` of the recalled energy. Returns (area, achieved ratio).
pub fn bisect_split_area<T: Real>(setup: &ProtocolSetup<T>, target: T, tolerance: T) -> Result<(T, T)> {
    if setup.schedule.readouts.len() != 2 {
        return Err(Error::Config("split bisection needs exactly two read-outs".into()));
    }
    if !(target > T::zero() && target < T::one()) {
        return Err(Error::Config(format!("target ratio must lie in (0, 1), got {target}")));
    }
    let ratio = |a: T| -> Result<T> {
        let f = partial_readout_fractions(setup, &[a, T::TAU()])?.fractions;
        let total = f[0] + f[1];
        if total > T::zero() {
            Ok(f[0] / total)
        } else {
            Err(Error::Config("no recalled energy; cannot split".into()))
        }
    };
    // the first bin grows with area up to full transfer at π
    let mut lo = T::PI() * T::lit(0.02);
    let mut hi = T::PI();
    let (r_lo, r_hi) = (ratio(lo)?, ratio(hi)?);
    if !(r_lo <= target && r_hi >= target) {
        return Err(Error::Config(format!(
            "target ratio {target} not bracketed by [{r_lo}, {r_hi}]"
        )));
    }
    let mut mid = (lo + hi) * T::lit(0.5);
    let mut r_mid = ratio(mid)?;
    for _ in 0..60 {
        if (r_mid - target).abs() <= tolerance {
            break;
        }
        if r_mid < target {
            lo = mid;
        } else {
            hi = mid;
        }
        mid = (lo + hi) * T::lit(0.5);
        r_mid = ratio(mid)?;
    }
    Ok((mid, r_mid))
}
