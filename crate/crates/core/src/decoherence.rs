//! Spin-wave retention during storage and lifetime extraction.
//!
//! Two independent channels multiply: ballistic washout of the phase
//! grating by thermal motion, and exponential dephasing from ambient
//! magnetic fields. Retention factors are amplitude factors; efficiency
//! retention is their square. Lifetimes are quoted for the efficiency.

use crate::error::{Error, Result};
use crate::geometry::BeamGeometry;
use crate::num::Real;
use crate::physics::{thermal_speed, AtomSpecies, EnsembleParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoherenceModel<T> {
    /// rad/m; zero disables the motional channel.
    pub delta_k_magnitude: T,
    /// m/s
    pub thermal_speed: T,
    /// 1/e time of the efficiency, s; infinite disables the channel.
    pub magnetic_lifetime: T,
}

impl<T: Real> DecoherenceModel<T> {
    pub fn new(delta_k_magnitude: T, thermal_speed: T, magnetic_lifetime: T) -> Result<Self> {
        for (name, v) in [
            ("delta_k_magnitude", delta_k_magnitude),
            ("thermal_speed", thermal_speed),
            ("magnetic_lifetime", magnetic_lifetime),
        ] {
            if v.is_nan() || v < T::zero() {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !delta_k_magnitude.is_finite() || !thermal_speed.is_finite() {
            return Err(Error::Config("delta_k and thermal speed must be finite".into()));
        }
        if magnetic_lifetime == T::zero() {
            return Err(Error::Config("magnetic_lifetime must be > 0 (infinity disables)".into()));
        }
        Ok(Self {
            delta_k_magnitude,
            thermal_speed,
            magnetic_lifetime,
        })
    }

    /// No decoherence at all.
    pub fn none() -> Self {
        Self {
            delta_k_magnitude: T::zero(),
            thermal_speed: T::zero(),
            magnetic_lifetime: T::infinity(),
        }
    }

    /// Builds the model from the beam geometry and the cloud.
    pub fn from_setup(geometry: &BeamGeometry<T>, species: &AtomSpecies<T>, ensemble: &EnsembleParams<T>) -> Result<Self> {
        let u = thermal_speed(species, ensemble.temperature)?;
        Self::new(geometry.phase_matching().delta_k_magnitude, u, ensemble.magnetic_lifetime)
    }

    /// |Δk|·u, the inverse motional 1/e time of the efficiency.
    pub fn motional_rate(&self) -> T {
        self.delta_k_magnitude * self.thermal_speed
    }

    /// Efficiency 1/e time of the motional channel; infinite when disabled.
    pub fn motional_lifetime(&self) -> T {
        let r = self.motional_rate();
        if r > T::zero() {
            T::one() / r
        } else {
            T::infinity()
        }
    }

    /// Instantaneous amplitude decay rate −d ln(retention)/dt at storage time t.
    pub fn amplitude_decay_rate(&self, t: T) -> T {
        let t = t.max(T::zero());
        let r = self.motional_rate();
        r * r * t + T::lit(0.5) / self.magnetic_lifetime
    }
}

fn check_time<T: Real>(t: T) -> Result<()> {
    if t.is_nan() || t < T::zero() {
        Err(Error::Domain(format!("storage time must be >= 0, got {t}")))
    } else {
        Ok(())
    }
}

/// exp(−(|Δk| u t)² / 2)
pub fn motional_retention<T: Real>(model: &DecoherenceModel<T>, t: T) -> Result<T> {
    check_time(t)?;
    let x = model.motional_rate() * t;
    Ok((-x * x / T::lit(2.0)).exp())
}

/// exp(−t / (2 τ_B))
pub fn magnetic_retention<T: Real>(model: &DecoherenceModel<T>, t: T) -> Result<T> {
    check_time(t)?;
    Ok((-t / (T::lit(2.0) * model.magnetic_lifetime)).exp())
}

pub fn total_retention<T: Real>(model: &DecoherenceModel<T>, t: T) -> Result<T> {
    Ok(motional_retention(model, t)? * magnetic_retention(model, t)?)
}

/// A storage-time sample of the memory efficiency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LifetimeSample<T> {
    /// s
    pub time: T,
    pub efficiency: T,
    /// One-sigma uncertainty of `efficiency`, if known.
    pub uncertainty: Option<T>,
}

impl<T: Real> LifetimeSample<T> {
    pub fn new(time: T, efficiency: T) -> Self {
        Self {
            time,
            efficiency,
            uncertainty: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LifetimeFit<T> {
    pub eta0: T,
    /// s
    pub tau: T,
    pub eta0_std_err: T,
    pub tau_std_err: T,
    /// Weighted residual sum of squares in log space.
    pub chi_squared: T,
}

/// Fits η₀·exp(−t/τ) by weighted least squares on ln η.
///
/// With uncertainties on every sample the weights are (η/σ)² and the
/// standard errors are absolute; otherwise the fit is unweighted and the
/// errors are scaled by the residual variance.
pub fn fit_exponential_lifetime<T: Real>(samples: &[LifetimeSample<T>]) -> Result<LifetimeFit<T>> {
    if samples.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 samples, got {}", samples.len())));
    }
    for s in samples {
        if !(s.efficiency > T::zero()) || !s.efficiency.is_finite() {
            return Err(Error::Domain(format!(
                "efficiency samples must be positive, got {} at t = {}",
                s.efficiency, s.time
            )));
        }
        if !s.time.is_finite() {
            return Err(Error::Domain("sample times must be finite".into()));
        }
    }
    let weighted = samples.iter().all(|s| s.uncertainty.is_some_and(|u| u > T::zero()));

    // normal equations for y = a + b t
    let (mut sw, mut st, mut sy, mut stt, mut sty) = (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
    for s in samples {
        let w = if weighted {
            let rel = s.uncertainty.unwrap() / s.efficiency;
            T::one() / (rel * rel)
        } else {
            T::one()
        };
        let y = s.efficiency.ln();
        sw = sw + w;
        st = st + w * s.time;
        sy = sy + w * y;
        stt = stt + w * s.time * s.time;
        sty = sty + w * s.time * y;
    }
    let det = sw * stt - st * st;
    let t_scale = samples.iter().map(|s| s.time.abs()).fold(T::zero(), T::max);
    if !(det.abs() > T::lit(1e-12) * sw * sw * t_scale * t_scale) {
        return Err(Error::Fit("degenerate design: all sample times are equal".into()));
    }
    let b = (sw * sty - st * sy) / det;
    let a = (stt * sy - st * sty) / det;
    if !(b < T::zero()) {
        return Err(Error::Fit(format!("data do not decay (slope {b})")));
    }

    let mut chi2 = T::zero();
    for s in samples {
        let w = if weighted {
            let rel = s.uncertainty.unwrap() / s.efficiency;
            T::one() / (rel * rel)
        } else {
            T::one()
        };
        let r = s.efficiency.ln() - (a + b * s.time);
        chi2 = chi2 + w * r * r;
    }
    let scale = if weighted {
        T::one()
    } else {
        chi2 / T::lit((samples.len() - 2) as f64)
    };
    let var_a = scale * stt / det;
    let var_b = scale * sw / det;

    let eta0 = a.exp();
    let tau = -T::one() / b;
    Ok(LifetimeFit {
        eta0,
        tau,
        eta0_std_err: eta0 * var_a.sqrt(),
        tau_std_err: var_b.sqrt() / (b * b),
        chi_squared: chi2,
    })
}

/// Lifetime implied by two samples alone: (t₂ − t₁)/ln(η₁/η₂).
pub fn two_point_lifetime<T: Real>(first: LifetimeSample<T>, second: LifetimeSample<T>) -> Result<T> {
    if !(first.efficiency > T::zero() && second.efficiency > T::zero()) {
        return Err(Error::Domain("efficiencies must be positive".into()));
    }
    let ratio = (first.efficiency / second.efficiency).ln();
    if ratio == T::zero() || first.time == second.time {
        return Err(Error::Fit("two-point lifetime needs distinct times and efficiencies".into()));
    }
    Ok((second.time - first.time) / ratio)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn kappa_model(kappa: f64, u: f64, tau_b: f64) -> DecoherenceModel<f64> {
        DecoherenceModel::new(std::f64::consts::TAU / kappa, u, tau_b).unwrap()
    }

    #[test]
    fn motional_timescales() {
        let u = 0.0692;
        let m = kappa_model(0.65e-6, u, f64::INFINITY);
        assert!((m.motional_lifetime() * 1e6 - 1.495).abs() < 0.01);
        let eff = motional_retention(&m, m.motional_lifetime()).unwrap().powi(2);
        assert!((eff - (-1.0f64).exp()).abs() < 1e-12);
        let wide = kappa_model(23e-6, u, f64::INFINITY);
        assert!((wide.motional_lifetime() * 1e6 - 52.9).abs() < 0.2);
        assert_eq!(motional_retention(&m, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn magnetic_examples() {
        let m = DecoherenceModel::<f64>::new(0.0, 0.0, 490e-9).unwrap();
        let eff = magnetic_retention(&m, 490e-9).unwrap().powi(2);
        assert!((eff - (-1.0f64).exp()).abs() < 1e-12);
        assert_eq!(magnetic_retention(&m, 0.0).unwrap(), 1.0);
        let ratio = (magnetic_retention(&m, 1250e-9).unwrap() / magnetic_retention(&m, 250e-9).unwrap()).powi(2);
        assert!((ratio - 0.1300).abs() < 1e-3);
        assert!((0.115 * ratio - 0.015).abs() < 1e-3);
    }

    #[test]
    fn total_retention_cases() {
        let only_b = DecoherenceModel::new(0.0, 0.07, 490e-9).unwrap();
        let only_m = kappa_model(0.65e-6, 0.0692, f64::INFINITY);
        let both = kappa_model(0.65e-6, 0.0692, 490e-9);
        for t in [0.0, 1e-7, 5e-7, 2e-6] {
            assert_eq!(total_retention(&only_b, t).unwrap(), magnetic_retention(&only_b, t).unwrap());
            assert_eq!(total_retention(&only_m, t).unwrap(), motional_retention(&only_m, t).unwrap());
            assert_eq!(total_retention(&DecoherenceModel::none(), t).unwrap(), 1.0);
        }
        // at t = 490 ns the motional efficiency factor is exp(-(0.49/1.495)^2) ~ 0.898;
        // its amplitude factor stays well above the magnetic one
        let t = 490e-9;
        let mot = motional_retention(&both, t).unwrap();
        let mag = magnetic_retention(&both, t).unwrap();
        assert!(mot > mag);
        assert!(((total_retention(&both, t).unwrap()) - mot * mag).abs() < 1e-15);
        assert!(motional_retention(&both, -1.0).is_err());
    }

    #[test]
    fn decay_rate_matches_log_derivative() {
        let m = kappa_model(0.65e-6, 0.0692, 490e-9);
        for t in [1e-8, 3e-7, 1e-6] {
            let h = 1e-12;
            let fd = -(total_retention(&m, t + h).unwrap().ln() - total_retention(&m, t - h).unwrap().ln()) / (2.0 * h);
            assert!(((m.amplitude_decay_rate(t) - fd) / fd).abs() < 1e-6);
        }
    }

    fn synthetic(tau: f64, eta0: f64, n: usize) -> Vec<LifetimeSample<f64>> {
        (0..n)
            .map(|i| {
                let t = 250e-9 + 1000e-9 * i as f64 / (n - 1) as f64;
                LifetimeSample::new(t, eta0 * (-t / tau).exp())
            })
            .collect()
    }

    #[test]
    fn noiseless_fit_is_exact() {
        let fit = fit_exponential_lifetime(&synthetic(490e-9, 0.19, 6)).unwrap();
        assert!(((fit.tau - 490e-9) / 490e-9).abs() < 1e-10);
        assert!((fit.eta0 - 0.19).abs() < 1e-12);
        assert!(fit.tau_std_err < 1e-15);
    }

    #[test]
    fn fit_with_uncertainties_uses_weights() {
        let mut s = synthetic(490e-9, 0.2, 6);
        for x in &mut s {
            x.uncertainty = Some(0.05 * x.efficiency);
        }
        let fit = fit_exponential_lifetime(&s).unwrap();
        assert!(((fit.tau - 490e-9) / 490e-9).abs() < 1e-10);
        // absolute errors: 5% relative on 6 points spanning 1000 ns
        assert!(fit.tau_std_err > 1e-9 && fit.tau_std_err < 60e-9, "{}", fit.tau_std_err);
    }

    #[test]
    fn noisy_fit_median_recovers_tau() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let normal = rand_distr::Normal::new(0.0, 0.05).unwrap();
        let mut taus: Vec<f64> = (0..100)
            .map(|_| {
                let s: Vec<_> = synthetic(490e-9, 0.2, 6)
                    .into_iter()
                    .map(|mut x| {
                        x.efficiency *= 1.0 + rng.sample(normal);
                        x
                    })
                    .collect();
                fit_exponential_lifetime(&s).unwrap().tau
            })
            .collect();
        taus.sort_by(f64::total_cmp);
        let median = 0.5 * (taus[49] + taus[50]);
        assert!(((median - 490e-9) / 490e-9).abs() < 0.05, "{median:e}");
    }

    #[test]
    fn fit_errors() {
        let mut s = synthetic(490e-9, 0.2, 4);
        s[1].efficiency = 0.0;
        assert!(matches!(fit_exponential_lifetime(&s), Err(Error::Domain(_))));
        let same: Vec<_> = (0..4).map(|_| LifetimeSample::new(1e-7, 0.1)).collect();
        assert!(matches!(fit_exponential_lifetime(&same), Err(Error::Fit(_))));
        assert!(fit_exponential_lifetime(&synthetic(490e-9, 0.2, 2)).is_err());
    }

    #[test]
    fn two_point_from_published_endpoints() {
        let tau = two_point_lifetime(LifetimeSample::<f64>::new(250e-9, 0.115), LifetimeSample::new(1250e-9, 0.008)).unwrap();
        assert!((tau * 1e9 - 375.0).abs() < 1.0, "{}", tau * 1e9);
    }

    proptest! {
        #[test]
        fn retention_is_monotone_and_bounded(
            dk in 0.0f64..2e7, u in 0.0f64..0.5, tb in 1e-8f64..1e-3, t1 in 0.0f64..1e-5, t2 in 0.0f64..1e-5,
        ) {
            let m = DecoherenceModel::new(dk, u, tb).unwrap();
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let (rl, rh) = (total_retention(&m, lo).unwrap(), total_retention(&m, hi).unwrap());
            prop_assert!(rl <= 1.0 && rh >= 0.0);
            prop_assert!(rh <= rl);
            if hi > lo + 1e-12 { prop_assert!(rh < rl || rh == 0.0); }
        }

        #[test]
        fn motional_scaling_collapse(dk in 1e4f64..2e7, u in 1e-3f64..0.5, t in 0.0f64..1e-5, c in 0.1f64..10.0) {
            let a = DecoherenceModel::new(dk, u, f64::INFINITY).unwrap();
            let b = DecoherenceModel::new(dk * c, u / c, f64::INFINITY).unwrap();
            let (ra, rb) = (motional_retention(&a, t).unwrap(), motional_retention(&b, t).unwrap());
            prop_assert!((ra - rb).abs() <= 1e-12);
        }

        #[test]
        fn noiseless_fit_is_exact_everywhere(tau in 5e-8f64..5e-6, eta0 in 1e-3f64..1.0, n in 3usize..12) {
            let fit = fit_exponential_lifetime(&synthetic(tau, eta0, n)).unwrap();
            prop_assert!(((fit.tau - tau) / tau).abs() < 1e-8);
            prop_assert!(((fit.eta0 - eta0) / eta0).abs() < 1e-8);
        }
    }
}
