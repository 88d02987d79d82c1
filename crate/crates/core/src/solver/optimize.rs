//! Calibration of the control amplitude by 1-D maximisation.

use super::{ProtocolSetup, SolverGrid};
use crate::error::{Error, Result};
use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOptimum<T> {
    /// rad/s
    pub peak_rabi: T,
    pub efficiency: T,
    /// Area of the write pulse at the optimum, rad.
    pub pulse_area: T,
    /// Set when the coarse scan was not unimodal; the result is then the
    /// best coarse sample.
    pub multimodal: bool,
    pub evaluations: usize,
}

const COARSE_POINTS: usize = 9;
const RESOLUTION: f64 = 1e-3;

/// Finds the common peak Rabi frequency of all control pulses that
/// maximises the total recall efficiency over `range` (rad/s).
///
/// A coarse scan checks unimodality, then golden-section search refines the
/// best bracket to 0.1 % relative amplitude.
pub fn optimize_control_amplitude<T: Real>(base: &ProtocolSetup<T>, range: (T, T)) -> Result<ControlOptimum<T>> {
    let (lo, hi) = range;
    if !(lo > T::zero()) || !(hi >= lo) || !hi.is_finite() {
        return Err(Error::Config(format!("invalid search range [{lo}, {hi}] rad/s")));
    }
    // one grid for the whole bracket keeps the objective smooth
    let mut setup = base.clone();
    let top = base.schedule.with_uniform_peak(hi)?;
    let limit = SolverGrid::max_dt(&base.probe, &top, &base.species);
    if setup.grid.dt > limit {
        setup.grid.dt = limit / T::lit(5.0);
    }

    let mut evaluations = 0usize;
    let mut eval = |peak: T| -> Result<T> {
        evaluations += 1;
        let mut s = setup.clone();
        s.schedule = setup.schedule.with_uniform_peak(peak)?;
        Ok(s.run()?.total_efficiency())
    };
    let area_at = |peak: T| -> Result<T> { base.schedule.with_uniform_peak(peak)?.write.pulse_area() };

    if hi == lo {
        let efficiency = eval(lo)?;
        return Ok(ControlOptimum {
            peak_rabi: lo,
            efficiency,
            pulse_area: area_at(lo)?,
            multimodal: false,
            evaluations,
        });
    }

    let xs: Vec<T> = (0..COARSE_POINTS)
        .map(|i| lo + (hi - lo) * T::lit(i as f64 / (COARSE_POINTS - 1) as f64))
        .collect();
    let ys = xs.iter().map(|&x| eval(x)).collect::<Result<Vec<T>>>()?;
    let best = (0..xs.len())
        .max_by(|&a, &b| ys[a].partial_cmp(&ys[b]).unwrap_or(std::cmp::Ordering::Equal))
        .expect("non-empty scan");

    // unimodal: non-decreasing up to the best sample, non-increasing after
    let rising = ys[..=best].windows(2).all(|w| w[1] >= w[0]);
    let falling = ys[best..].windows(2).all(|w| w[1] <= w[0]);
    if !(rising && falling) {
        return Ok(ControlOptimum {
            peak_rabi: xs[best],
            efficiency: ys[best],
            pulse_area: area_at(xs[best])?,
            multimodal: true,
            evaluations,
        });
    }

    let mut a = xs[best.saturating_sub(1)];
    let mut b = xs[(best + 1).min(xs.len() - 1)];
    let inv_phi = T::lit((5f64.sqrt() - 1.0) / 2.0);
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    let (mut best_x, mut best_y) = (xs[best], ys[best]);
    while (b - a) > T::lit(RESOLUTION) * ((a + b) * T::lit(0.5)) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = eval(d)?;
        }
    }
    for (x, y) in [(c, fc), (d, fd)] {
        if y > best_y {
            best_x = x;
            best_y = y;
        }
    }
    Ok(ControlOptimum {
        peak_rabi: best_x,
        efficiency: best_y,
        pulse_area: area_at(best_x)?,
        multimodal: false,
        evaluations,
    })
}
