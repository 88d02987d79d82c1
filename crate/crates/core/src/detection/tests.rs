use super::*;
use crate::solver::tests::standard_setup;
use crate::solver::SimulationResult;
use proptest::prelude::*;
use std::sync::OnceLock;

fn memory_run() -> &'static SimulationResult<f64> {
    static SIM: OnceLock<SimulationResult<f64>> = OnceLock::new();
    SIM.get_or_init(|| standard_setup(10.0, 30e-9, 250e-9).run().unwrap())
}

fn config(n: u64, nbar: f64, seed: u64) -> TrialConfig {
    TrialConfig { n_trials: n, mean_photons_in: nbar, bin_width: 1e-9, analysis_window: 30e-9, rng_seed: seed }
}

#[test]
fn calibration_reproduces_published_counts() {
    let d = DetectorModel::published_calibration();
    let cal = NoiseCalibration::PUBLISHED;
    assert!((d.dark_ambient_rate - 151.515).abs() < 0.01, "{}", d.dark_ambient_rate);
    assert!((d.leakage_spread_fwhm - 57.6e-9).abs() < 0.3e-9, "{}", d.leakage_spread_fwhm);
    assert!((d.atom_noise_read / 1.3795e-5 - 1.0).abs() < 1e-3, "{}", d.atom_noise_read);
    assert!((d.leakage_write / d.leakage_read - 36.0 / 26.0).abs() < 1e-12);

    // forward model of each calibration count
    let n = cal.n_trials;
    let w = cal.window;
    let off = cal.leakage_offset;
    let s = d.leakage_spread_fwhm;
    let bg = cal.background;
    let recall = bg + n * d.leakage_read * gaussian_window_fraction(off, s, 0.0, w);
    let read_peak = bg + n * d.leakage_read * gaussian_window_fraction(off, s, off, w);
    let write_peak = bg + n * d.leakage_write * gaussian_window_fraction(off, s, off, w);
    let atoms = recall + n * d.atom_noise_read * gaussian_window_fraction(0.0, cal.control_fwhm, 0.0, w);
    for (got, want) in [(recall, 22.0), (read_peak, 31.0), (write_peak, 41.0), (atoms, 36.0)] {
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    }
}

#[test]
fn gaussian_window_fraction_matches_erf_values() {
    // ±1σ, ±2σ of a standard normal
    let fwhm = (8.0 * std::f64::consts::LN_2).sqrt();
    assert!((gaussian_window_fraction(0.0, fwhm, 0.0, 2.0) - 0.682_689_492_137_086).abs() < 1e-9);
    assert!((gaussian_window_fraction(0.0, fwhm, 0.0, 4.0) - 0.954_499_736_103_642).abs() < 1e-9);
    assert_eq!(gaussian_window_fraction(0.0, fwhm, 100.0, 1.0), 0.0);
}

#[test]
fn all_sources_off_gives_no_counts() {
    let det = DetectorModel::noiseless(0.1);
    let h = run_trials(memory_run(), &det, &config(100_000, 0.1, 1), SourceFlags::NONE, None).unwrap();
    assert_eq!(h.total(), 0);
    assert_eq!(h.n_trials, 100_000);
}

#[test]
fn dark_counts_match_rate_times_window() {
    let mut det = DetectorModel::noiseless(0.1);
    det.dark_ambient_rate = 151.515;
    let cfg = config(1_100_000, 0.1, 2);
    let p = RateProfile::build(memory_run(), &det, &cfg, SourceFlags::NONE, None).unwrap();
    let expected = p.expected_between(0.0, 30e-9) * 1.1e6;
    assert!((expected - 5.0).abs() < 1e-3, "{expected}");
    let h = run_trials_with_profile(&p, &cfg).unwrap();
    let per_ns = h.total() as f64 / ((h.end() - h.start()) * 1e9);
    let mu = p.total() * 1.1e6 / ((h.end() - h.start()) * 1e9);
    assert!((per_ns - mu).abs() < 4.0 * (mu / ((h.end() - h.start()) * 1e9)).sqrt());
}

#[test]
fn probe_only_counts_the_input() {
    let det = DetectorModel::noiseless(0.1);
    let cfg = config(1_100_000, 0.1, 3);
    let p = RateProfile::build(memory_run(), &det, &cfg, SourceFlags::PROBE_ONLY, None).unwrap();
    assert!((p.total() * 1.1e6 / 1.1e4 - 1.0).abs() < 2e-3, "{}", p.total());
    let h = run_trials_with_profile(&p, &cfg).unwrap();
    let n = h.total() as f64;
    assert!((n - 1.1e4).abs() < 4.0 * 1.1e4f64.sqrt(), "{n}");
}

#[test]
fn recall_window_signal_scales_with_efficiency() {
    let det = DetectorModel::noiseless(0.1);
    let cfg = config(1_100_000, 0.1, 4);
    let sim = memory_run();
    let p = RateProfile::build(sim, &det, &cfg, SourceFlags::FULL, Some(0.125)).unwrap();
    let recall = p.expected_between(sim.window_edges[0], *sim.times.last().unwrap()) * 1.1e6;
    assert!((recall - 1375.0).abs() < 1.0, "{recall}");
}

#[test]
fn probe_with_atoms_and_no_control_is_rejected() {
    let det = DetectorModel::noiseless(0.1);
    let flags = SourceFlags { probe: true, atoms: true, control: false };
    assert!(run_trials(memory_run(), &det, &config(10, 0.1, 0), flags, None).is_err());
}

#[test]
fn same_seed_is_bit_identical_and_seeds_differ() {
    let det = DetectorModel::published_calibration();
    let cfg = config(200_000, 0.5, 42);
    let a = run_trials(memory_run(), &det, &cfg, SourceFlags::FULL, None).unwrap();
    let b = run_trials(memory_run(), &det, &cfg, SourceFlags::FULL, None).unwrap();
    assert_eq!(a, b);
    let c = run_trials(memory_run(), &det, &TrialConfig { rng_seed: 43, ..cfg }, SourceFlags::FULL, None).unwrap();
    assert_ne!(a.counts, c.counts);
}

#[test]
fn thread_count_does_not_change_results() {
    let det = DetectorModel::published_calibration();
    let cfg = config(100_000, 1.0, 7);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_trials(memory_run(), &det, &cfg, SourceFlags::FULL, None).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn flat_source_bins_are_poisson() {
    let profile = RateProfile::flat(0.0, 1e-9, 200, 0.002);
    let cfg = config(50_000, 0.0, 11);
    let h = run_trials_with_profile(&profile, &cfg).unwrap();
    let xs: Vec<f64> = h.counts.iter().map(|&c| c as f64).collect();
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    assert!((mean - 100.0).abs() < 4.0 * (100.0f64 / 200.0).sqrt(), "{mean}");
    // var/mean of 200 Poisson samples has sd ≈ sqrt(2/199)
    assert!((var / mean - 1.0).abs() < 4.0 * (2.0f64 / 199.0).sqrt(), "{}", var / mean);
}

#[test]
fn estimator_converges_to_expected_rate() {
    let det = DetectorModel::published_calibration();
    let cfg = config(1_000_000, 0.1, 5);
    let sim = memory_run();
    let p = RateProfile::build(sim, &det, &cfg, SourceFlags::FULL, None).unwrap();
    let center = sim.readout_centers[0];
    let h = run_trials_with_profile(&p, &cfg).unwrap();
    let est = estimate_probabilities(&h, center, 30e-9).unwrap();
    let expected = p.expected_between(center - 15e-9, center + 15e-9);
    assert!((est.p - expected).abs() < 3.0 * est.std_err, "{} vs {} ± {}", est.p, expected, est.std_err);
}

#[test]
fn signal_is_linear_in_mean_photon_number() {
    let det = DetectorModel::noiseless(0.1);
    let sim = memory_run();
    let xs = [0.1, 0.5, 1.0, 2.0, 4.0];
    let ys: Vec<f64> = xs
        .iter()
        .map(|&nbar| {
            let p = RateProfile::build(sim, &det, &config(1, nbar, 0), SourceFlags::FULL, None).unwrap();
            p.expected_between(sim.window_edges[0], *sim.times.last().unwrap())
        })
        .collect();
    let slope = xs.iter().zip(&ys).map(|(x, y)| x * y).sum::<f64>() / xs.iter().map(|x| x * x).sum::<f64>();
    let eta = sim.efficiency_per_readout[0] * 0.1;
    assert!((slope / eta - 1.0).abs() < 0.02, "{slope} vs {eta}");
}

#[test]
fn configs_two_and_three_agree_without_atom_noise() {
    let mut det = DetectorModel::published_calibration();
    det.atom_noise_read = 0.0;
    let sim = memory_run();
    let cfg = config(1_100_000, 0.1, 9);
    let h2 = run_trials(sim, &det, &cfg, SourceFlags::CONTROL_ONLY, None).unwrap();
    let h3 = run_trials(sim, &det, &TrialConfig { rng_seed: 10, ..cfg }, SourceFlags::CONTROL_ATOMS, None).unwrap();
    let c = sim.readout_centers[0];
    let n2 = window_counts(&h2, c, 30e-9).unwrap() as f64;
    let n3 = window_counts(&h3, c, 30e-9).unwrap() as f64;
    // two-sample Poisson z test
    let z = (n2 - n3) / (n2 + n3).max(1.0).sqrt();
    assert!(z.abs() < 1.96, "N2={n2} N3={n3}");
}

#[test]
fn noise_budget_rejects_mismatched_trials() {
    let a = DetectionHistogram::uniform(0.0, 1e-9, 100, 10);
    let b = DetectionHistogram::uniform(0.0, 1e-9, 100, 11);
    let w = NoiseWindows { window: 30e-9, recall_center: 50e-9, write_peak_center: 20e-9, read_peak_center: 30e-9 };
    assert!(noise_budget(&a, &a, &b, &w).is_err());
    let z = noise_budget(&a, &a, &a, &w).unwrap();
    assert_eq!((z.n1.counts, z.n2.counts, z.n3.counts), (0, 0, 0));
}

#[test]
fn estimator_examples() {
    let mut h = DetectionHistogram::uniform(0.0, 1e-9, 60, 1_100_000);
    h.counts[30] = 36;
    let e = estimate_probabilities(&h, 30e-9, 30e-9).unwrap();
    assert_eq!(e.counts, 36);
    assert!((e.p - 3.2727e-5).abs() < 1e-8);
    let zero = estimate_probabilities(&h, 5e-9, 8e-9).unwrap();
    assert_eq!(zero.p, 0.0);
    assert_eq!(zero.upper_bound, Some(3.0 / 1.1e6));
    let full = ProbabilityEstimate::from_counts(1000, 1000).unwrap();
    assert_eq!((full.p, full.std_err), (1.0, 0.0));
    assert!(estimate_probabilities(&h, 55e-9, 30e-9).is_err());

    let pn = unconditional_noise_probability(36.0, 1.1e6, 0.1).unwrap();
    assert!((pn - 3.2727e-4).abs() < 1e-7);
    assert_eq!(unconditional_noise_probability(0.0, 5.0, 0.3).unwrap(), 0.0);
    assert!((unconditional_noise_probability(36.0, 1.1e6, 1.0).unwrap() - 3.2727e-5).abs() < 1e-8);
    assert!(unconditional_noise_probability(36.0, 1.1e6, 0.0).is_err());

    let sf = snr_and_fidelity(1.234e-2, 3.3e-4).unwrap();
    assert!((sf.snr - 36.39).abs() < 0.01);
    assert!((sf.fidelity.unwrap() - 0.9725).abs() < 1e-3);
    let one = snr_and_fidelity(2e-3, 1e-3).unwrap();
    assert_eq!((one.snr, one.fidelity), (1.0, Some(0.0)));
    let zero = snr_and_fidelity(1e-3, 1e-3).unwrap();
    assert_eq!((zero.snr, zero.fidelity), (0.0, None));
    assert!(snr_and_fidelity(1e-3, 0.0).unwrap().is_infinite());
    let below = snr_and_fidelity(1e-4, 1e-3).unwrap();
    assert!(below.below_noise && below.snr < 0.0);
}

#[test]
fn histogram_csv_and_event_round_trip() {
    let mut h = DetectionHistogram::uniform(-5e-9, 1e-9, 10, 4);
    h.counts[2] = 3;
    let csv = histogram_csv(&h);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("bin_start_ns,bin_end_ns,counts,counts_per_trial"));
    assert_eq!(lines.nth(2), Some("-3.000,-2.000,3,7.5000000000e-1"));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.txt");
    std::fs::write(&path, "# ns\n-2.5\n-2.1\n\n-2.9\n100\n").unwrap();
    let ev = read_events(&path).unwrap();
    assert_eq!(ev.len(), 4);
    let g = histogram_from_events(&ev, -5e-9, 1e-9, 10, 4).unwrap();
    assert_eq!(g, h);
    std::fs::write(&path, "1.0\nabc\n").unwrap();
    assert!(matches!(read_events(&path), Err(crate::Error::Parse { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn merge_is_commutative(a in prop::collection::vec(0u64..100, 8), b in prop::collection::vec(0u64..100, 8)) {
        let mk = |c: &Vec<u64>, n| { let mut h = DetectionHistogram::uniform(0.0, 1e-9, 8, n); h.counts = c.clone(); h };
        let (ha, hb) = (mk(&a, 3), mk(&b, 5));
        let mut ab = ha.clone();
        ab.merge(&hb).unwrap();
        let mut ba = hb.clone();
        ba.merge(&ha).unwrap();
        prop_assert_eq!(&ab, &ba);
        prop_assert_eq!(ab.total(), ha.total() + hb.total());
        prop_assert_eq!(ab.n_trials, 8);
    }

    #[test]
    fn snr_matches_definition(ps in 1e-6f64..1.0, pn in 1e-6f64..1.0) {
        let sf = snr_and_fidelity(ps, pn).unwrap();
        prop_assert!((sf.snr - (ps / pn - 1.0)).abs() <= 1e-9 * (1.0 + sf.snr.abs()));
        if let Some(f) = sf.fidelity {
            prop_assert!((0.0..1.0 + 1e-12).contains(&f));
        }
    }
}
