use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use super::report::{Provenance, ReportTable, RunReport};
use super::scenario::{ExperimentKind, Scenario};
use crate::decoherence::{fit_exponential_lifetime, two_point_lifetime, LifetimeSample};
use crate::detection::{
    noise_budget, run_trials, snr_and_fidelity, trial_statistics, unconditional_noise_probability, window_counts,
    DetectionHistogram, NoiseWindows, RateProfile, SourceFlags, TrialConfig,
};
use crate::error::{Error, Result};
use crate::geometry::grating_period;
use crate::pulse::calibrate_peak_for_area;
use crate::solver::{bisect_split_area, optimize_control_amplitude, SimulationResult};

const TWO_PI: f64 = std::f64::consts::TAU;
const PI: f64 = std::f64::consts::PI;

/// Seed of sweep point `index`, derived from the scenario seed.
pub fn point_seed(seed: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(seed ^ mix(index))
}

/// Parses, validates and runs a scenario file.
pub fn run_scenario(path: &Path) -> Result<RunReport> {
    let scenario = Scenario::from_file(path)?;
    run(&scenario)
}

/// Runs an already validated scenario; failures carry the scenario name.
pub fn run(scenario: &Scenario) -> Result<RunReport> {
    let start = Instant::now();
    let mut out = Output::default();
    let result = match scenario.kind {
        ExperimentKind::SingleRun => single_run(scenario, &mut out),
        ExperimentKind::LifetimeSweep => lifetime_sweep(scenario, &mut out),
        ExperimentKind::SnrSweep => snr_sweep(scenario, &mut out),
        ExperimentKind::NoiseBudget => noise_budget_run(scenario, &mut out),
        ExperimentKind::BeamSplitter => beam_splitter(scenario, &mut out),
        ExperimentKind::EfficiencyVsDepth => efficiency_vs_depth(scenario, &mut out),
        ExperimentKind::OptimizeControl => optimize_control(scenario, &mut out),
    };
    result.map_err(|e| Error::Scenario { scenario: scenario.name.clone(), source: Box::new(e) })?;
    Ok(RunReport {
        scenario: scenario.clone(),
        metrics: out.metrics,
        tables: out.tables,
        histograms: out.histograms,
        notes: out.notes,
        solver_steps: out.steps,
        wall_clock_s: start.elapsed().as_secs_f64(),
        provenance: Provenance::for_scenario(scenario),
    })
}

#[derive(Default)]
struct Output {
    metrics: Vec<(String, f64)>,
    tables: Vec<ReportTable>,
    histograms: Vec<(String, DetectionHistogram)>,
    notes: Vec<String>,
    steps: usize,
}

impl Output {
    fn metric(&mut self, key: impl Into<String>, v: f64) {
        self.metrics.push((key.into(), v));
    }

    fn sim(&mut self, sim: &SimulationResult<f64>) {
        self.steps += sim.diagnostics.steps;
    }

    fn sim_metrics(&mut self, prefix: &str, sim: &SimulationResult<f64>) {
        self.metric(format!("{prefix}transmitted_fraction"), sim.transmitted_fraction);
        self.metric(format!("{prefix}efficiency"), sim.total_efficiency());
        if sim.efficiency_per_readout.len() > 1 {
            for (k, e) in sim.efficiency_per_readout.iter().enumerate() {
                self.metric(format!("{prefix}efficiency_readout_{}", k + 1), *e);
            }
        }
        self.metric(format!("{prefix}residual_spin_norm"), sim.residual_spin_norm);
        self.metric(format!("{prefix}residual_optical_norm"), sim.residual_optical_norm);
        self.metric(format!("{prefix}spontaneous_loss_fraction"), sim.spontaneous_loss_fraction);
        self.metric(format!("{prefix}decoherence_loss_fraction"), sim.decoherence_loss_fraction);
        self.metric(format!("{prefix}post_write_spin_norm"), sim.post_write_spin_norm);
        self.metric(format!("{prefix}bookkeeping_sum"), sim.bookkeeping_sum());
    }
}

fn trace_table(sim: &SimulationResult<f64>) -> ReportTable {
    let mut t = ReportTable::new("trace", &["t_ns", "input_intensity_per_ns", "output_intensity_per_ns", "window"]);
    for i in 0..sim.times.len() {
        t.push(vec![
            sim.times[i] * 1e9,
            sim.e_in[i].norm_sqr() * 1e-9,
            sim.output_intensity(i) * 1e-9,
            sim.window_of(sim.times[i]) as f64,
        ]);
    }
    t
}

fn eta_override(s: &Scenario) -> Option<f64> {
    s.trials.as_ref().and_then(|t| t.memory_efficiency)
}

fn single_run(s: &Scenario, out: &mut Output) -> Result<()> {
    let setup = s.protocol_setup()?;
    let sim = setup.run()?;
    out.sim(&sim);
    out.sim_metrics("", &sim);
    for k in 0..sim.readout_centers.len() {
        if let Some(t) = sim.recall_peak_time(k + 1) {
            out.metric(format!("recall_peak_delay_ns_{}", k + 1), (t - sim.readout_centers[k]) * 1e9);
        }
    }
    if let Some(g) = s.geometry_model()? {
        out.metric("grating_period_um", grating_period(&g) * 1e6);
        let model = s.decoherence_model()?;
        out.metric("motional_lifetime_us", model.motional_lifetime() * 1e6);
    }
    out.tables.push(trace_table(&sim));
    if s.trials.is_some() {
        let det = s.detector_model()?;
        let cfg = s.trial_config(point_seed(s.seed, 0))?;
        let h = run_trials(&sim, &det, &cfg, SourceFlags::FULL, eta_override(s))?;
        let center = sim.readout_centers[0];
        out.metric("recall_window_counts", window_counts(&h, center, cfg.analysis_window)? as f64);
        out.metric("n_trials", cfg.n_trials as f64);
        out.histograms.push(("full".into(), h));
    }
    Ok(())
}

fn lifetime_sweep(s: &Scenario, out: &mut Output) -> Result<()> {
    let times = s.sweep.as_ref().and_then(|w| w.storage_times_ns.clone()).unwrap_or_default();
    let det = s.detector_model()?;
    let base = s.trial_config(s.seed)?;
    let nbar = base.mean_photons_in;
    let eta_t = det.downstream_transmission;
    struct Point {
        sim: SimulationResult<f64>,
        full: DetectionHistogram,
        noise: DetectionHistogram,
        signal: u64,
        background: u64,
    }
    let points: Vec<Point> = times
        .par_iter()
        .enumerate()
        .map(|(i, &t)| {
            let sim = s.protocol_setup_with_times(&[t])?.run()?;
            let cfg = TrialConfig { rng_seed: point_seed(s.seed, 2 * i as u64), ..base };
            let full = run_trials(&sim, &det, &cfg, SourceFlags::FULL, None)?;
            let cfg_n = TrialConfig { rng_seed: point_seed(s.seed, 2 * i as u64 + 1), ..base };
            let noise = run_trials(&sim, &det, &cfg_n, SourceFlags::CONTROL_ATOMS, None)?;
            let c = sim.readout_centers[0];
            let signal = window_counts(&full, c, base.analysis_window)?;
            let background = window_counts(&noise, c, base.analysis_window)?;
            Ok(Point { sim, full, noise, signal, background })
        })
        .collect::<Result<_>>()?;

    let n = base.n_trials as f64;
    let scale = n * nbar * eta_t;
    let mut table = ReportTable::new(
        "lifetime",
        &["storage_ns", "eta_sim", "signal_counts", "noise_counts", "eta_measured", "eta_measured_err"],
    );
    let mut sim_samples = Vec::new();
    let mut meas_samples = Vec::new();
    for (p, &t) in points.iter().zip(&times) {
        out.sim(&p.sim);
        let eta_sim = p.sim.total_efficiency();
        let eta_meas = (p.signal as f64 - p.background as f64) / scale;
        let err = ((p.signal + p.background) as f64).max(1.0).sqrt() / scale;
        table.push(vec![t, eta_sim, p.signal as f64, p.background as f64, eta_meas, err]);
        sim_samples.push(LifetimeSample::new(t * 1e-9, eta_sim));
        meas_samples.push(LifetimeSample { time: t * 1e-9, efficiency: eta_meas, uncertainty: Some(err) });
        out.histograms.push((format!("storage_{t}ns"), p.full.clone()));
        out.histograms.push((format!("storage_{t}ns_noise"), p.noise.clone()));
    }
    out.tables.push(table);

    match fit_exponential_lifetime(&sim_samples) {
        Ok(f) => {
            out.metric("tau_sim_ns", f.tau * 1e9);
            out.metric("eta0_sim", f.eta0);
        }
        Err(e) => out.notes.push(format!("fit on simulated efficiencies failed: {e}")),
    }
    if meas_samples.iter().all(|m| m.efficiency > 0.0) {
        match fit_exponential_lifetime(&meas_samples) {
            Ok(f) => {
                out.metric("tau_ns", f.tau * 1e9);
                out.metric("tau_ns_std_err", f.tau_std_err * 1e9);
                out.metric("eta0", f.eta0);
                out.metric("eta0_std_err", f.eta0_std_err);
                out.metric("fit_chi_squared", f.chi_squared);
            }
            Err(e) => out.notes.push(format!("fit on measured efficiencies failed: {e}")),
        }
        if let (Some(&a), Some(&b)) = (meas_samples.first(), meas_samples.last()) {
            if a.time != b.time {
                out.metric("tau_two_point_ns", two_point_lifetime(a, b)? * 1e9);
            }
        }
    } else {
        out.notes.push("some measured efficiencies are not positive; exponential fit skipped".into());
    }
    Ok(())
}

fn through_origin_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let slope = sxy / sxx;
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { f64::NAN };
    (slope, r2)
}

fn snr_sweep(s: &Scenario, out: &mut Output) -> Result<()> {
    let nbars = s.sweep.as_ref().and_then(|w| w.mean_photons_in.clone()).unwrap_or_default();
    let det = s.detector_model()?;
    let base = s.trial_config(s.seed)?;
    let sim = s.protocol_setup()?.run()?;
    out.sim(&sim);
    out.metric("efficiency_sim", sim.total_efficiency());
    let center = sim.readout_centers[0];
    let w = base.analysis_window;
    let noise_cfg = TrialConfig { rng_seed: point_seed(s.seed, 0), ..base };
    let noise = run_trials(&sim, &det, &noise_cfg, SourceFlags::CONTROL_ATOMS, None)?;
    let fulls: Vec<DetectionHistogram> = nbars
        .par_iter()
        .enumerate()
        .map(|(i, &nbar)| {
            let cfg = TrialConfig { mean_photons_in: nbar, rng_seed: point_seed(s.seed, i as u64 + 1), ..base };
            run_trials(&sim, &det, &cfg, SourceFlags::FULL, eta_override(s))
        })
        .collect::<Result<_>>()?;

    let mut table = ReportTable::new(
        "snr",
        &["mean_photons_in", "p_s", "p_s_err", "p_n", "p_n_err", "snr", "snr_err", "fidelity", "fidelity_err"],
    );
    for (full, &nbar) in fulls.iter().zip(&nbars) {
        let st = trial_statistics(full, &noise, center, w, det.downstream_transmission)?;
        if st.below_noise {
            out.notes.push(format!("n_in = {nbar}: signal below noise"));
        }
        table.push(vec![
            nbar,
            st.p_s,
            st.p_s_err,
            st.p_n,
            st.p_n_err,
            st.snr,
            st.snr_err,
            st.fidelity.unwrap_or(f64::NAN),
            st.fidelity_err.unwrap_or(f64::NAN),
        ]);
    }
    let snr = table.column("snr").expect("column exists");
    let (slope, r2) = through_origin_fit(&nbars, &snr);
    out.metric("snr_slope", slope);
    out.metric("snr_r_squared", r2);
    if let (Some(&x), Some(&y), Some(&e)) =
        (nbars.first(), snr.first(), table.column("snr_err").expect("column exists").first())
    {
        out.metric("snr_first", y);
        out.metric("snr_first_err", e);
        out.metric("snr_first_mean_photons_in", x);
    }
    out.histograms.push(("noise".into(), noise));
    for (h, nbar) in fulls.into_iter().zip(&nbars) {
        out.histograms.push((format!("nbar_{nbar}"), h));
    }
    out.tables.push(table);
    Ok(())
}

fn noise_budget_run(s: &Scenario, out: &mut Output) -> Result<()> {
    let det = s.detector_model()?;
    let base = s.trial_config(s.seed)?;
    let sim = s.protocol_setup()?.run()?;
    out.sim(&sim);
    let configs = [
        ("config_I", SourceFlags::PROBE_ONLY),
        ("config_II", SourceFlags::CONTROL_ONLY),
        ("config_III", SourceFlags::CONTROL_ATOMS),
        ("full", SourceFlags::FULL),
    ];
    let hists: Vec<DetectionHistogram> = configs
        .par_iter()
        .enumerate()
        .map(|(i, &(_, flags))| {
            let cfg = TrialConfig { rng_seed: point_seed(s.seed, i as u64), ..base };
            run_trials(&sim, &det, &cfg, flags, eta_override(s))
        })
        .collect::<Result<_>>()?;
    let recall = sim.readout_centers[0];
    let windows = NoiseWindows {
        window: base.analysis_window,
        recall_center: recall,
        write_peak_center: sim.write_center + det.leakage_time_offset,
        read_peak_center: recall + det.leakage_time_offset,
    };
    let budget = noise_budget(&hists[0], &hists[1], &hists[2], &windows)?;
    for (k, c) in budget.entries() {
        out.metric(k, c.counts as f64);
        out.metric(format!("{k}_err"), c.err);
    }
    // expectations from the rate model
    for (i, (_, flags)) in configs.iter().take(3).enumerate() {
        let p = RateProfile::build(&sim, &det, &base, *flags, eta_override(s))?;
        let half = 0.5 * base.analysis_window;
        let n = base.n_trials as f64;
        out.metric(format!("N{}_expected", i + 1), n * p.expected_between(recall - half, recall + half));
    }
    let n = base.n_trials as f64;
    let eta_t = det.downstream_transmission;
    let p_n = unconditional_noise_probability(budget.n3.counts as f64, n, eta_t)?;
    out.metric("p_n", p_n);
    out.metric("p_n_err", budget.n3.err / (n * eta_t));
    let full = window_counts(&hists[3], recall, base.analysis_window)?;
    out.metric("N_full", full as f64);
    out.metric("N_s", full as f64 - budget.n3.counts as f64);
    let p_s = unconditional_noise_probability(full as f64, n, eta_t)?;
    out.metric("p_s", p_s);
    let sf = snr_and_fidelity(p_s, p_n)?;
    out.metric("snr", sf.snr);
    if let Some(f) = sf.fidelity {
        out.metric("fidelity", f);
    }
    for ((label, _), h) in configs.iter().zip(hists) {
        out.histograms.push(((*label).into(), h));
    }
    Ok(())
}

fn beam_splitter(s: &Scenario, out: &mut Output) -> Result<()> {
    let setup = s.protocol_setup()?;
    let sim = setup.run()?;
    out.sim(&sim);
    out.sim_metrics("", &sim);
    out.metric("residual_spin_ratio", sim.residual_spin_norm / sim.post_write_spin_norm);

    let sweep = s.sweep.clone().unwrap_or_default();
    let target = sweep.split_target.unwrap_or(0.5);
    let tol = sweep.split_tolerance.unwrap_or(0.01);
    let mut two = s.clone();
    two.control.readout_times_ns.truncate(2);
    two.control.readout_areas_pi = vec![1.0, 2.0];
    two.control.peak_rabi_2pi_mhz = None;
    let (area, ratio) = bisect_split_area(&two.protocol_setup()?, target, tol)?;
    out.metric("split_area_pi", area / PI);
    out.metric("split_ratio", ratio);

    let det = s.detector_model()?;
    let cfg = s.trial_config(point_seed(s.seed, 0))?;
    let h = run_trials(&sim, &det, &cfg, SourceFlags::FULL, eta_override(s))?;
    let profile = RateProfile::build(&sim, &det, &cfg, SourceFlags::FULL, eta_override(s))?;
    let mut bins = ReportTable::new("bins", &["window_center_ns", "counts", "expected_counts"]);
    let centers = std::iter::once(sim.probe_center).chain(sim.readout_centers.iter().copied());
    for (k, c) in centers.enumerate() {
        let counts = window_counts(&h, c, cfg.analysis_window)?;
        let half = 0.5 * cfg.analysis_window;
        let expected = cfg.n_trials as f64 * profile.expected_between(c - half, c + half);
        bins.push(vec![c * 1e9, counts as f64, expected]);
        let label = if k == 0 { "transmitted_counts".to_string() } else { format!("recall_counts_{k}") };
        out.metric(label, counts as f64);
    }
    out.tables.push(bins);
    out.tables.push(trace_table(&sim));
    out.histograms.push(("full".into(), h));
    Ok(())
}

fn efficiency_vs_depth(s: &Scenario, out: &mut Output) -> Result<()> {
    let depths = s.sweep.as_ref().and_then(|w| w.optical_depths.clone()).unwrap_or_default();
    let sims: Vec<SimulationResult<f64>> = depths
        .par_iter()
        .map(|&d| {
            let mut sc = s.clone();
            sc.ensemble.optical_depth = d;
            sc.protocol_setup()?.run()
        })
        .collect::<Result<_>>()?;
    let mut table = ReportTable::new(
        "efficiency_vs_depth",
        &["optical_depth", "transmitted", "efficiency", "residual_spin", "spontaneous_loss", "bookkeeping_sum"],
    );
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for (sim, &d) in sims.iter().zip(&depths) {
        out.sim(sim);
        let eta = sim.total_efficiency();
        table.push(vec![
            d,
            sim.transmitted_fraction,
            eta,
            sim.residual_spin_norm,
            sim.spontaneous_loss_fraction,
            sim.bookkeeping_sum(),
        ]);
        out.metric(format!("efficiency_d{d}"), eta);
        if eta > best.1 {
            best = (d, eta);
        }
    }
    out.metric("max_efficiency", best.1);
    out.metric("depth_at_max", best.0);
    out.tables.push(table);
    Ok(())
}

fn optimize_control(s: &Scenario, out: &mut Output) -> Result<()> {
    let sweep = s.sweep.clone().unwrap_or_default();
    let (a_lo, a_hi) = (sweep.area_min_pi.unwrap_or(1.0), sweep.area_max_pi.unwrap_or(3.0));
    let fwhms = sweep.pulse_fwhms_ns.clone();
    let list = fwhms.clone().unwrap_or_else(|| vec![s.control.fwhm_ns]);
    let results = list
        .par_iter()
        .map(|&f| {
            let mut sc = s.clone();
            if fwhms.is_some() {
                sc.control.fwhm_ns = f;
                sc.probe.fwhm_ns = f;
            }
            let shape = sc.control.shape;
            let fwhm = sc.control.fwhm_ns * 1e-9;
            let lo = calibrate_peak_for_area(shape, fwhm, a_lo * PI)?;
            let hi = calibrate_peak_for_area(shape, fwhm, a_hi * PI)?;
            optimize_control_amplitude(&sc.protocol_setup()?, (lo, hi))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = ReportTable::new(
        "optimum",
        &["pulse_fwhm_ns", "peak_rabi_2pi_MHz", "write_area_pi", "efficiency", "multimodal", "evaluations"],
    );
    for (o, &f) in results.iter().zip(&list) {
        let peak = o.peak_rabi / TWO_PI * 1e-6;
        let area = o.pulse_area / PI;
        table.push(vec![f, peak, area, o.efficiency, o.multimodal as u8 as f64, o.evaluations as f64]);
        out.metric(format!("peak_rabi_2pi_MHz_fwhm{f}"), peak);
        out.metric(format!("write_area_pi_fwhm{f}"), area);
        out.metric(format!("efficiency_fwhm{f}"), o.efficiency);
        if o.multimodal {
            out.notes.push(format!("{f} ns: efficiency is not unimodal in the control amplitude"));
        }
    }
    out.tables.push(table);
    Ok(())
}
