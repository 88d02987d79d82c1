use super::*;
use proptest::prelude::*;

const MINIMAL: &str = r#"
[scenario]
name = "tiny"
kind = "efficiency_vs_depth"

[ensemble]
optical_depth = 4

[probe]
fwhm_ns = 30

[control]
fwhm_ns = 30
readout_times_ns = [150]

[sweep]
optical_depths = [2, 4]
"#;

#[test]
fn bundled_scenarios_validate_and_round_trip() {
    for (name, text) in BUNDLED {
        let s = Scenario::from_toml_str(text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(s.name, name);
        let again = Scenario::from_toml_str(&s.to_toml_string()).unwrap();
        assert_eq!(again, s, "{name}");
    }
}

#[test]
fn integers_are_accepted_as_floats() {
    let s = Scenario::from_toml_str(MINIMAL).unwrap();
    assert_eq!(s.ensemble.optical_depth, 4.0);
    assert_eq!(s.control.readout_areas_pi, vec![2.0]);
    assert_eq!(s.ensemble.overlap_efficiency, 1.0);
}

#[test]
fn every_offending_key_is_listed() {
    let text = MINIMAL
        .replace("optical_depth = 4", "optical_depth = \"four\"\ncolour = 3")
        .replace("fwhm_ns = 30\nreadout", "fwhm_ns = -30\nreadout")
        .replace("optical_depths = [2, 4]", "optical_depths = []")
        + "\n[extra]\nx = 1\n";
    let Err(Error::Validation(errs)) = Scenario::from_toml_str(&text) else { panic!("expected validation error") };
    let joined = errs.join("\n");
    for needle in ["ensemble.optical_depth", "ensemble.colour", "sweep.optical_depths", "extra"] {
        assert!(joined.contains(needle), "{needle} not in\n{joined}");
    }
}

#[test]
fn empty_sweep_is_a_validation_error() {
    let text = MINIMAL.replace("optical_depths = [2, 4]", "optical_depths = []");
    let Err(Error::Validation(errs)) = Scenario::from_toml_str(&text) else { panic!() };
    assert!(errs.iter().any(|e| e.contains("must not be empty")), "{errs:?}");
}

#[test]
fn kind_specific_sections_are_required() {
    let text = MINIMAL.replace("efficiency_vs_depth", "snr_sweep");
    let Err(Error::Validation(errs)) = Scenario::from_toml_str(&text) else { panic!() };
    let joined = errs.join("\n");
    assert!(joined.contains("trials") && joined.contains("detector") && joined.contains("mean_photons_in"), "{joined}");
}

#[test]
fn unknown_kind_and_bad_toml() {
    let text = MINIMAL.replace("efficiency_vs_depth", "teleport");
    assert!(matches!(Scenario::from_toml_str(&text), Err(Error::Validation(_))));
    assert!(matches!(Scenario::from_toml_str("[scenario"), Err(Error::Parse { .. })));
}

#[test]
fn efficiency_sweep_runs_in_order() {
    let s = Scenario::from_toml_str(MINIMAL).unwrap();
    let r = run(&s).unwrap();
    let t = r.table("efficiency_vs_depth").unwrap();
    assert_eq!(t.column("optical_depth").unwrap(), vec![2.0, 4.0]);
    let eta = t.column("efficiency").unwrap();
    assert!(eta[1] > eta[0]);
    assert_eq!(r.metric("efficiency_d4"), Some(eta[1]));
    for b in t.column("bookkeeping_sum").unwrap() {
        assert!((b - 1.0).abs() < 1e-3);
    }
}

#[test]
fn solver_failures_carry_the_scenario_name() {
    let mut s = Scenario::from_toml_str(MINIMAL).unwrap();
    s.solver.n_z = Some(32);
    s.solver.dt_ns = Some(50.0);
    let err = run(&s).unwrap_err();
    assert!(matches!(err, Error::Scenario { ref scenario, .. } if scenario == "tiny"), "{err}");
}

#[test]
fn report_files_are_deterministic() {
    let s = Scenario::from_toml_str(MINIMAL).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let a = run(&s).unwrap();
    let b = run(&s).unwrap();
    a.write(&dir.path().join("a")).unwrap();
    b.write(&dir.path().join("b")).unwrap();
    for f in ["metrics.csv", "efficiency_vs_depth.csv", "provenance.txt", "scenario.toml"] {
        let x = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let y = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
    let m = read_metrics(&dir.path().join("a")).unwrap();
    assert_eq!(m.len(), a.metrics.len());
    assert_eq!(a.provenance.config_hash.len(), 64);
}

#[test]
fn comparison_examples() {
    let row = |v, s| vec![ReferenceRow { key: "eta".into(), value: v, sigma: s }];
    let c = compare_to_reference(&[("eta".into(), 0.38)], &row(0.38, 0.05), 2.0);
    assert!(c.passed());
    let c = compare_to_reference(&[("eta".into(), 0.10)], &row(0.38, 0.05), 2.0);
    assert!(!c.passed());
    assert!((c.rows[0].z.unwrap() + 5.6).abs() < 1e-9);
    assert!(compare_to_reference(&[("eta".into(), 0.38)], &row(0.38, 0.0), 2.0).passed());
    assert!(!compare_to_reference(&[("eta".into(), 0.381)], &row(0.38, 0.0), 2.0).passed());
    let c = compare_to_reference(&[], &row(0.38, 0.05), 2.0);
    assert_eq!(c.missing(), vec!["eta"]);
    assert!(c.render().contains("missing"));
}

#[test]
fn point_seeds_are_distinct() {
    let seeds: std::collections::BTreeSet<u64> = (0..1000).map(|i| point_seed(42, i)).collect();
    assert_eq!(seeds.len(), 1000);
    assert_ne!(point_seed(1, 0), point_seed(2, 0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scenario_round_trip(
        d in 0.0f64..40.0,
        t_uk in 0.0f64..200.0,
        fwhm in 5.0f64..60.0,
        readouts in prop::collection::vec(50.0f64..2000.0, 1..4),
        seed in any::<u64>(),
        tau in prop::option::of(100.0f64..5000.0),
    ) {
        let mut s = Scenario::from_toml_str(MINIMAL).unwrap();
        s.ensemble.optical_depth = d;
        s.ensemble.temperature_uk = t_uk;
        s.ensemble.magnetic_lifetime_ns = tau;
        s.probe.fwhm_ns = fwhm;
        s.control.fwhm_ns = fwhm;
        let mut rs = readouts.clone();
        rs.sort_by(f64::total_cmp);
        rs.dedup();
        s.control.readout_areas_pi = vec![2.0; rs.len()];
        s.control.readout_times_ns = rs;
        s.seed = seed % (i64::MAX as u64);
        let text = s.to_toml_string();
        let back = Scenario::from_toml_str(&text).unwrap();
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(back.to_toml_string(), text);
    }
}
