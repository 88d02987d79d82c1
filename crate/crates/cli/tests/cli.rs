use std::process::Command;

fn atsmem() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_atsmem"));
    c.env_remove("ATSMEM_OUT_DIR");
    c
}

#[test]
fn lists_bundled_scenarios() {
    let out = atsmem().arg("list-scenarios").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 7);
    assert!(text.contains("fig2a_lifetime") && text.contains("lifetime_sweep"));
}

#[test]
fn validate_reports_every_bad_key_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(
        &path,
        "[scenario]\nname = \"bad\"\nkind = \"efficiency_vs_depth\"\n[ensemble]\noptical_depth = 1\nfoo = 2\n\
         [probe]\nfwhm_ns = 30\n[control]\nfwhm_ns = 30\nreadout_times_ns = [100]\nbar = true\n[sweep]\noptical_depths = []\n",
    )
    .unwrap();
    let out = atsmem().arg("validate").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    for key in ["ensemble.foo", "control.bar", "sweep.optical_depths"] {
        assert!(err.contains(key), "{key} missing from\n{err}");
    }
    let ok = atsmem().args(["validate", "fig3_noise_budget"]).output().unwrap();
    assert!(ok.status.success());
}

#[test]
fn missing_scenario_is_a_plain_failure() {
    let out = atsmem().args(["validate", "/nonexistent/nothing.toml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_writes_report_and_compare_sets_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = atsmem()
        .args(["run", "efficiency_vs_depth", "--seed", "9", "--threads", "2"])
        .env("ATSMEM_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = dir.path().join("efficiency_vs_depth");
    for f in ["metrics.csv", "efficiency_vs_depth.csv", "summary.txt", "provenance.txt", "scenario.toml"] {
        assert!(report.join(f).exists(), "{f}");
    }
    assert!(std::fs::read_to_string(report.join("provenance.txt")).unwrap().contains("seed=9"));

    let good = dir.path().join("good.csv");
    std::fs::write(&good, "key,value,sigma\nefficiency_d10,0.331,0.01\n").unwrap();
    let c = atsmem().arg("compare").arg(&report).arg(&good).output().unwrap();
    assert_eq!(c.status.code(), Some(0), "{}", String::from_utf8_lossy(&c.stdout));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "key,value,sigma\nefficiency_d10,0.54,0.03\nno_such_metric,1,1\n").unwrap();
    let c = atsmem().arg("compare").arg(&report).arg(&bad).output().unwrap();
    assert_eq!(c.status.code(), Some(4));
    let text = String::from_utf8(c.stdout).unwrap();
    assert!(text.contains("FAIL efficiency_d10") && text.contains("no_such_metric"), "{text}");
}

#[test]
fn explicit_out_dir_wins() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("here");
    let out = atsmem().args(["run", "optimize_control", "--out"]).arg(&target).output().unwrap();
    assert!(out.status.success());
    assert!(target.join("optimum.csv").exists());
}
