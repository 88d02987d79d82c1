//! Fixed-step RK4 in time, midpoint integration of E along z.
//!
//! P and S live at cell centres, E at cell edges: e₀ = E_in and
//! e_{j+1} = e_j + i g dz P_j. Each cell sees the edge average
//! ē_j = e_j + i g dz P_j / 2, which makes the semi-discrete system conserve
//! Σ dz(|P|² + |S|²) + ∫|E_out|² exactly when γ = Γ_s = 0.
//!
//! Cumulative quantities (emitted energy per window, spontaneous and
//! decoherence losses, input energy) are integrated as extra RK4 components
//! so that the bookkeeping error is of the same order as the state error.

use num_complex::Complex;

use super::{FieldState, ProtocolSetup, SimulationResult, SolverDiagnostics};
use crate::decoherence::total_retention;
use crate::error::{Error, Result};
use crate::num::Real;

struct System<'a, T: Real> {
    coupling: T,
    optical_decay: T,
    n_z: usize,
    dz: T,
    setup: &'a ProtocolSetup<T>,
    input: &'a dyn Fn(T) -> Complex<T>,
}

/// Rates of the cumulative bookkeeping integrals.
#[derive(Clone, Copy, Default)]
struct Fluxes<T> {
    out: T,
    input: T,
    spontaneous: T,
    decoherence: T,
}

impl<T: Real> System<'_, T> {
    fn spin_decay(&self, t: T) -> T {
        let d = &self.setup.decoherence;
        if d.motional_rate() == T::zero() && d.magnetic_lifetime.is_infinite() {
            return T::zero();
        }
        d.amplitude_decay_rate(t - self.setup.schedule.write.center_time)
    }

    /// Evaluates dP/dt, dS/dt and the flux rates; fills `e_mid` with ē_j.
    fn derivs(
        &self,
        t: T,
        p: &[Complex<T>],
        s: &[Complex<T>],
        dp: &mut [Complex<T>],
        ds: &mut [Complex<T>],
        e_mid: &mut [Complex<T>],
    ) -> (Complex<T>, Fluxes<T>) {
        let half = T::lit(0.5);
        let i = Complex::<T>::i();
        let omega = self.setup.schedule.rabi(t);
        let half_omega = i * (omega * half);
        let gamma_s = self.spin_decay(t);
        let g_i = i * self.coupling;
        let step = g_i * self.dz;

        let e_in = (self.input)(t);
        let mut e = e_in;
        let mut p_norm = T::zero();
        let mut s_norm = T::zero();
        for j in 0..self.n_z {
            let inc = step * p[j];
            let mid = e + inc * half;
            e_mid[j] = mid;
            e = e + inc;
            dp[j] = p[j] * (-self.optical_decay) + g_i * mid + half_omega * s[j];
            ds[j] = s[j] * (-gamma_s) + half_omega * p[j];
            p_norm = p_norm + p[j].norm_sqr();
            s_norm = s_norm + s[j].norm_sqr();
        }
        let two = T::lit(2.0);
        let fluxes = Fluxes {
            out: e.norm_sqr(),
            input: e_in.norm_sqr(),
            spontaneous: two * self.optical_decay * p_norm * self.dz,
            decoherence: two * gamma_s * s_norm * self.dz,
        };
        (e, fluxes)
    }
}

fn norm_sq<T: Real>(v: &[Complex<T>]) -> T {
    v.iter().map(|c| c.norm_sqr()).sum()
}

fn axpy<T: Real>(out: &mut [Complex<T>], base: &[Complex<T>], k: &[Complex<T>], h: T) {
    for ((o, b), k) in out.iter_mut().zip(base).zip(k) {
        *o = *b + *k * h;
    }
}

pub(super) fn run<T: Real>(setup: &ProtocolSetup<T>, input: &dyn Fn(T) -> Complex<T>) -> Result<SimulationResult<T>> {
    let grid = setup.grid;
    let gamma = setup.species.excited_decay_rate;
    let optical_decay = setup.options.optical_decay_override.unwrap_or(gamma);
    let coupling = (setup.ensemble.optical_depth * gamma / T::lit(2.0)).sqrt();
    let n_z = grid.n_z;
    let dz = grid.dz();
    let sys = System {
        coupling,
        optical_decay,
        n_z,
        dz,
        setup,
        input,
    };

    let sched = &setup.schedule;
    let write_center = sched.write.center_time;
    let readout_centers: Vec<T> = sched.readouts.iter().map(|r| r.envelope.center_time).collect();
    let half = T::lit(0.5);
    let mut window_edges = Vec::with_capacity(readout_centers.len());
    let mut prev = write_center;
    for &c in &readout_centers {
        window_edges.push((prev + c) * half);
        prev = c;
    }

    let (probe_start, probe_end) = setup.probe.support();
    let pulse_supports: Vec<(T, T)> = sched.pulses().map(|p| p.support()).collect();
    let controls_end = pulse_supports.iter().map(|s| s.1).fold(T::neg_infinity(), T::max);
    let t_start = pulse_supports.iter().map(|s| s.0).fold(probe_start, T::min);
    let last_drive = controls_end.max(probe_end);
    let tail = if optical_decay > T::zero() {
        T::lit(12.0) / optical_decay
    } else {
        T::lit(5.0) * setup.probe.fwhm
    };
    let t_end = last_drive + tail.max(T::lit(5.0) * setup.probe.fwhm);

    let zero = Complex::new(T::zero(), T::zero());
    let mut p = vec![zero; n_z];
    let mut s = vec![zero; n_z];
    let mut kp = [vec![zero; n_z], vec![zero; n_z], vec![zero; n_z], vec![zero; n_z]];
    let mut ks = [vec![zero; n_z], vec![zero; n_z], vec![zero; n_z], vec![zero; n_z]];
    let mut tp = vec![zero; n_z];
    let mut ts = vec![zero; n_z];
    let mut e_mid = vec![zero; n_z];

    let n_windows = readout_centers.len() + 1;
    let mut window_energy = vec![T::zero(); n_windows];
    let mut input_energy = T::zero();
    let mut spontaneous = T::zero();
    let mut decoherence = T::zero();
    let mut post_write_spin: Option<T> = None;

    let mut times = Vec::new();
    let mut e_out = Vec::new();
    let mut e_in = Vec::new();
    let mut snapshots = Vec::new();
    let mut diag = SolverDiagnostics::default();

    let dt = grid.dt;
    let mut t = t_start;
    let mut step = 0usize;
    let w = [T::one(), T::lit(2.0), T::lit(2.0), T::one()];
    let six = T::lit(6.0);

    while t < t_end {
        let window = window_edges.iter().take_while(|&&e| t >= e).count();
        if post_write_spin.is_none() && window >= 1 {
            post_write_spin = Some(norm_sq(&s) * dz);
        }

        // Hold shortcut across control-free, field-free stretches.
        if setup.options.hold_shortcut && t > probe_end && optical_decay > T::zero() {
            let quiet = !pulse_supports.iter().any(|&(a, b)| t >= a && t <= b);
            let next_start = pulse_supports
                .iter()
                .map(|s| s.0)
                .filter(|&s0| s0 > t)
                .fold(T::infinity(), T::min);
            let p_norm = norm_sq(&p) * dz;
            if quiet && p_norm < grid.abs_tol {
                let target = if next_start.is_finite() { next_start } else { t_end };
                let jump = target - t;
                if jump > T::lit(2.0) * dt {
                    // window boundaries crossed by the jump still need the post-write snapshot
                    if post_write_spin.is_none() && window_edges.first().is_some_and(|&e| target >= e) {
                        post_write_spin = Some(norm_sq(&s) * dz);
                    }
                    let p_keep = (-optical_decay * jump).exp();
                    let storage_now = (t - write_center).max(T::zero());
                    let storage_next = (target - write_center).max(T::zero());
                    let s_keep = total_retention(&setup.decoherence, storage_next)?
                        / total_retention(&setup.decoherence, storage_now)?;
                    let s_norm = norm_sq(&s) * dz;
                    spontaneous = spontaneous + p_norm * (T::one() - p_keep * p_keep);
                    decoherence = decoherence + s_norm * (T::one() - s_keep * s_keep);
                    for x in p.iter_mut() {
                        *x = *x * p_keep;
                    }
                    for x in s.iter_mut() {
                        *x = *x * s_keep;
                    }
                    diag.skipped_time += jump.as_f64();
                    t = target;
                    continue;
                }
            }
            if t > last_drive && !next_start.is_finite() && p_norm < grid.abs_tol * T::lit(1e-2) {
                break;
            }
        }

        let h2 = dt * half;
        let (e0, f0) = sys.derivs(t, &p, &s, &mut kp[0], &mut ks[0], &mut e_mid);
        if let Some(every) = setup.options.record_every {
            if every > 0 && step.is_multiple_of(every) {
                snapshots.push(FieldState {
                    time: t,
                    e: e_mid.clone(),
                    p: p.clone(),
                    s: s.clone(),
                });
            }
        }
        times.push(t);
        e_out.push(e0);
        e_in.push(input(t));

        axpy(&mut tp, &p, &kp[0], h2);
        axpy(&mut ts, &s, &ks[0], h2);
        let (_, f1) = sys.derivs(t + h2, &tp, &ts, &mut kp[1], &mut ks[1], &mut e_mid);
        axpy(&mut tp, &p, &kp[1], h2);
        axpy(&mut ts, &s, &ks[1], h2);
        let (_, f2) = sys.derivs(t + h2, &tp, &ts, &mut kp[2], &mut ks[2], &mut e_mid);
        axpy(&mut tp, &p, &kp[2], dt);
        axpy(&mut ts, &s, &ks[2], dt);
        let (_, f3) = sys.derivs(t + dt, &tp, &ts, &mut kp[3], &mut ks[3], &mut e_mid);

        let h6 = dt / six;
        for j in 0..n_z {
            p[j] = p[j] + (kp[0][j] * w[0] + kp[1][j] * w[1] + kp[2][j] * w[2] + kp[3][j] * w[3]) * h6;
            s[j] = s[j] + (ks[0][j] * w[0] + ks[1][j] * w[1] + ks[2][j] * w[2] + ks[3][j] * w[3]) * h6;
        }
        let fl = [f0, f1, f2, f3];
        let comb = |sel: fn(&Fluxes<T>) -> T| -> T {
            fl.iter().zip(w.iter()).map(|(f, &wi)| sel(f) * wi).sum::<T>() * h6
        };
        window_energy[window] = window_energy[window] + comb(|f| f.out);
        input_energy = input_energy + comb(|f| f.input);
        spontaneous = spontaneous + comb(|f| f.spontaneous);
        decoherence = decoherence + comb(|f| f.decoherence);

        t = t + dt;
        step += 1;

        let p_norm = norm_sq(&p) * dz;
        let s_norm = norm_sq(&s) * dz;
        if !(p_norm.is_finite() && s_norm.is_finite()) {
            return Err(Error::Numerical {
                step,
                time_s: t.as_f64(),
                detail: format!("non-finite state (|P|² = {p_norm}, |S|² = {s_norm})"),
            });
        }
        let bound = input_energy * (T::one() + grid.rel_tol) + grid.abs_tol;
        if p_norm + s_norm > bound {
            return Err(Error::Numerical {
                step,
                time_s: t.as_f64(),
                detail: format!(
                    "excitation {} exceeds absorbed input {}; step too coarse",
                    (p_norm + s_norm).as_f64(),
                    input_energy.as_f64()
                ),
            });
        }
    }

    diag.steps = step;
    diag.input_energy = input_energy.as_f64();
    let norm = if input_energy > T::zero() { input_energy } else { T::one() };
    let ov = setup.ensemble.overlap_efficiency;
    let residual_spin = norm_sq(&s) * dz / norm;
    let residual_optical = norm_sq(&p) * dz / norm;
    let post_write = post_write_spin.unwrap_or_else(|| norm_sq(&s) * dz) / norm;

    Ok(SimulationResult {
        times,
        e_out: e_out.into_iter().map(|e| e / norm.sqrt()).collect(),
        e_in: e_in.into_iter().map(|e| e / norm.sqrt()).collect(),
        transmitted_fraction: (T::one() - ov) + ov * window_energy[0] / norm,
        efficiency_per_readout: window_energy[1..].iter().map(|&x| ov * x / norm).collect(),
        residual_spin_norm: ov * residual_spin,
        residual_optical_norm: ov * residual_optical,
        spontaneous_loss_fraction: ov * spontaneous / norm,
        decoherence_loss_fraction: ov * decoherence / norm,
        post_write_spin_norm: ov * post_write,
        overlap: ov,
        window_edges,
        write_center,
        readout_centers,
        control_fwhm: sched.pulses().map(|p| p.fwhm).collect(),
        probe_center: setup.probe.center_time,
        snapshots,
        diagnostics: diag,
    })
}
