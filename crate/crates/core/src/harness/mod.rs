//! Scenario files, the runner that maps each experiment kind onto the
//! physics modules, report writing and reference comparison.

mod compare;
mod report;
mod run;
mod scenario;

#[cfg(test)]
mod tests;

use std::path::Path;

pub use compare::{compare_to_reference, read_metrics, read_reference, Comparison, ComparisonRow, ReferenceRow};
pub use report::{fmt_value, Provenance, ReportTable, RunReport};
pub use run::{point_seed, run, run_scenario};
pub use scenario::{
    Calibration, ControlSpec, DetectorSpec, EnsembleSpec, ExperimentKind, GeometrySpec, ProbeSpec, Scenario,
    SolverSpec, SpeciesSpec, SweepSpec, TrialSpec,
};

use crate::error::{Error, Result};

/// Scenarios shipped with the library, by name.
pub const BUNDLED: [(&str, &str); 7] = [
    ("fig1b_single_run", include_str!("../../scenarios/fig1b_single_run.toml")),
    ("fig2a_lifetime", include_str!("../../scenarios/fig2a_lifetime.toml")),
    ("fig2b_snr_sweep", include_str!("../../scenarios/fig2b_snr_sweep.toml")),
    ("fig3_noise_budget", include_str!("../../scenarios/fig3_noise_budget.toml")),
    ("fig4_beam_splitter", include_str!("../../scenarios/fig4_beam_splitter.toml")),
    ("efficiency_vs_depth", include_str!("../../scenarios/efficiency_vs_depth.toml")),
    ("optimize_control", include_str!("../../scenarios/optimize_control.toml")),
];

pub fn bundled(name: &str) -> Option<Scenario> {
    let (_, text) = BUNDLED.iter().find(|(n, _)| *n == name)?;
    Some(Scenario::from_toml_str(text).expect("bundled scenarios validate"))
}

/// Loads a scenario file, falling back to a bundled name when no such
/// file exists.
pub fn load_scenario(arg: &str) -> Result<Scenario> {
    let path = Path::new(arg);
    if path.exists() {
        return Scenario::from_file(path);
    }
    let stem = arg.strip_suffix(".toml").unwrap_or(arg);
    match BUNDLED.iter().find(|(n, _)| *n == stem) {
        Some((_, text)) => Scenario::from_toml_str(text),
        None => Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or bundled scenario"))),
    }
}
