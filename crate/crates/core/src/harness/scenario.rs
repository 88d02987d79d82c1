//! Scenario files: sectioned TOML with units spelled out in every key.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use toml::{Table, Value};

use crate::decoherence::DecoherenceModel;
use crate::detection::{DetectorModel, NoiseCalibration, TrialConfig};
use crate::error::{Error, Result};
use crate::geometry::{BeamGeometry, ExtinctionStage};
use crate::physics::{AtomSpecies, EnsembleParams};
use crate::pulse::{ControlSchedule, FwhmConvention, PulseEnvelope, PulseShape, Readout};
use crate::solver::{ProtocolSetup, SolverGrid};

const TWO_PI: f64 = std::f64::consts::TAU;
const PI: f64 = std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExperimentKind {
    SingleRun,
    LifetimeSweep,
    SnrSweep,
    NoiseBudget,
    BeamSplitter,
    EfficiencyVsDepth,
    OptimizeControl,
}

impl ExperimentKind {
    pub const ALL: [Self; 7] = [
        Self::SingleRun,
        Self::LifetimeSweep,
        Self::SnrSweep,
        Self::NoiseBudget,
        Self::BeamSplitter,
        Self::EfficiencyVsDepth,
        Self::OptimizeControl,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::SingleRun => "single_run",
            Self::LifetimeSweep => "lifetime_sweep",
            Self::SnrSweep => "snr_sweep",
            Self::NoiseBudget => "noise_budget",
            Self::BeamSplitter => "beam_splitter",
            Self::EfficiencyVsDepth => "efficiency_vs_depth",
            Self::OptimizeControl => "optimize_control",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

/// How the detector noise parameters are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Calibration {
    /// Solved from the published noise counts; explicit keys override.
    Published,
    /// Every noise source zero unless given explicitly.
    Noiseless,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesSpec {
    pub name: String,
    pub excited_decay_2pi_mhz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub optical_depth: f64,
    pub temperature_uk: f64,
    pub length_mm: f64,
    /// Absent means no magnetic dephasing.
    pub magnetic_lifetime_ns: Option<f64>,
    pub overlap_efficiency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometrySpec {
    pub angle_deg: f64,
    pub extinction_db: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSpec {
    pub shape: PulseShape,
    pub fwhm_ns: f64,
    pub center_ns: f64,
    pub convention: FwhmConvention,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlSpec {
    pub shape: PulseShape,
    pub fwhm_ns: f64,
    pub write_area_pi: f64,
    /// Read-out centres relative to the probe centre.
    pub readout_times_ns: Vec<f64>,
    pub readout_areas_pi: Vec<f64>,
    /// When set, every pulse gets this peak and the areas follow from it.
    pub peak_rabi_2pi_mhz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverSpec {
    pub n_z: Option<usize>,
    pub dt_ns: Option<f64>,
    pub hold_shortcut: Option<bool>,
    pub optical_decay_2pi_mhz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorSpec {
    pub calibration: Calibration,
    pub downstream_transmission: f64,
    pub dark_rate_cps: Option<f64>,
    pub leakage_write: Option<f64>,
    pub leakage_read: Option<f64>,
    pub leakage_offset_ns: Option<f64>,
    pub leakage_fwhm_ns: Option<f64>,
    pub atom_noise_read: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSpec {
    pub n_trials: u64,
    pub mean_photons_in: f64,
    pub bin_width_ns: f64,
    pub analysis_window_ns: f64,
    /// Rescales the simulated recall to this efficiency.
    pub memory_efficiency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepSpec {
    pub storage_times_ns: Option<Vec<f64>>,
    pub mean_photons_in: Option<Vec<f64>>,
    pub optical_depths: Option<Vec<f64>>,
    pub pulse_fwhms_ns: Option<Vec<f64>>,
    /// Search bracket for the control optimisation, as write-pulse areas
    /// in units of π; converted to peak Rabi frequencies per pulse width.
    pub area_min_pi: Option<f64>,
    pub area_max_pi: Option<f64>,
    pub split_target: Option<f64>,
    pub split_tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub kind: ExperimentKind,
    pub seed: u64,
    pub description: Option<String>,
    pub species: SpeciesSpec,
    pub ensemble: EnsembleSpec,
    pub geometry: Option<GeometrySpec>,
    pub probe: ProbeSpec,
    pub control: ControlSpec,
    pub solver: SolverSpec,
    pub detector: Option<DetectorSpec>,
    pub trials: Option<TrialSpec>,
    pub sweep: Option<SweepSpec>,
}

// ---------------------------------------------------------------------------
// reading

type Errors = RefCell<Vec<String>>;

struct Section<'a> {
    name: &'static str,
    table: &'a Table,
    used: RefCell<BTreeSet<String>>,
    errs: &'a Errors,
}

impl<'a> Section<'a> {
    fn new(name: &'static str, table: &'a Table, errs: &'a Errors) -> Self {
        Self { name, table, used: RefCell::new(BTreeSet::new()), errs }
    }

    fn err(&self, key: &str, msg: impl std::fmt::Display) {
        self.errs.borrow_mut().push(format!("{}.{}: {}", self.name, key, msg));
    }

    fn get(&self, key: &str) -> Option<&'a Value> {
        self.used.borrow_mut().insert(key.to_string());
        self.table.get(key)
    }

    fn as_f64(&self, key: &str, v: &Value) -> Option<f64> {
        match v {
            Value::Float(f) if f.is_finite() => Some(*f),
            Value::Float(f) => {
                self.err(key, format!("must be finite, got {f}"));
                None
            }
            Value::Integer(i) => Some(*i as f64),
            other => {
                self.err(key, format!("expected a number, got {}", other.type_str()));
                None
            }
        }
    }

    fn f64_opt(&self, key: &str) -> Option<f64> {
        self.get(key).and_then(|v| self.as_f64(key, v))
    }

    fn f64_req(&self, key: &str) -> f64 {
        match self.get(key) {
            Some(v) => self.as_f64(key, v).unwrap_or(f64::NAN),
            None => {
                self.err(key, "missing");
                f64::NAN
            }
        }
    }

    fn f64_or(&self, key: &str, default: f64) -> f64 {
        self.f64_opt(key).unwrap_or(default)
    }

    fn u64_opt(&self, key: &str) -> Option<u64> {
        match self.get(key)? {
            Value::Integer(i) if *i >= 0 => Some(*i as u64),
            Value::Integer(i) => {
                self.err(key, format!("must be >= 0, got {i}"));
                None
            }
            other => {
                self.err(key, format!("expected an integer, got {}", other.type_str()));
                None
            }
        }
    }

    fn u64_req(&self, key: &str) -> u64 {
        if !self.table.contains_key(key) {
            self.err(key, "missing");
        }
        self.u64_opt(key).unwrap_or(0)
    }

    fn bool_opt(&self, key: &str) -> Option<bool> {
        match self.get(key)? {
            Value::Boolean(b) => Some(*b),
            other => {
                self.err(key, format!("expected a boolean, got {}", other.type_str()));
                None
            }
        }
    }

    fn str_opt(&self, key: &str) -> Option<String> {
        match self.get(key)? {
            Value::String(s) => Some(s.clone()),
            other => {
                self.err(key, format!("expected a string, got {}", other.type_str()));
                None
            }
        }
    }

    fn str_req(&self, key: &str) -> String {
        if !self.table.contains_key(key) {
            self.err(key, "missing");
        }
        self.str_opt(key).unwrap_or_default()
    }

    fn list_opt(&self, key: &str) -> Option<Vec<f64>> {
        match self.get(key)? {
            Value::Array(a) => {
                let xs: Vec<f64> = a.iter().filter_map(|v| self.as_f64(key, v)).collect();
                (xs.len() == a.len()).then_some(xs)
            }
            other => {
                self.err(key, format!("expected an array of numbers, got {}", other.type_str()));
                None
            }
        }
    }

    fn subtable(&self, key: &str) -> Option<&'a Table> {
        match self.get(key)? {
            Value::Table(t) => Some(t),
            other => {
                self.err(key, format!("expected a table, got {}", other.type_str()));
                None
            }
        }
    }

    fn finish(self) {
        let used = self.used.into_inner();
        for k in self.table.keys() {
            if !used.contains(k) {
                self.errs.borrow_mut().push(format!("{}.{}: unknown key", self.name, k));
            }
        }
    }
}

fn parse_shape(sec: &Section, key: &str, default: PulseShape) -> PulseShape {
    match sec.str_opt(key).as_deref() {
        None => default,
        Some("gaussian") => PulseShape::Gaussian,
        Some("square") => PulseShape::Square,
        Some(other) => {
            sec.err(key, format!("expected \"gaussian\" or \"square\", got {other:?}"));
            default
        }
    }
}

fn shape_str(s: PulseShape) -> &'static str {
    match s {
        PulseShape::Gaussian => "gaussian",
        PulseShape::Square => "square",
    }
}

const SECTIONS: [&str; 10] =
    ["scenario", "species", "ensemble", "geometry", "probe", "control", "solver", "detector", "trials", "sweep"];

impl Scenario {
    /// Parses and validates; the error lists every offending key.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let root: Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
            path: "<scenario>".into(),
            detail: e.to_string(),
        })?;
        let errs: Errors = RefCell::new(Vec::new());
        let empty = Table::new();
        let section = |name: &'static str, required: bool| -> Option<Section> {
            match root.get(name) {
                Some(Value::Table(t)) => Some(Section::new(name, t, &errs)),
                Some(other) => {
                    errs.borrow_mut().push(format!("{name}: expected a section, got {}", other.type_str()));
                    None
                }
                None => {
                    if required {
                        errs.borrow_mut().push(format!("{name}: missing section"));
                    }
                    None
                }
            }
        };
        for k in root.keys() {
            if !SECTIONS.contains(&k.as_str()) {
                errs.borrow_mut().push(format!("{k}: unknown section"));
            }
        }

        let sc = section("scenario", true).unwrap_or_else(|| Section::new("scenario", &empty, &errs));
        let name = sc.str_req("name");
        let kind_s = sc.str_req("kind");
        let kind = ExperimentKind::parse(&kind_s);
        if kind.is_none() && !kind_s.is_empty() {
            sc.err(
                "kind",
                format!(
                    "unknown experiment kind {kind_s:?}; expected one of {}",
                    ExperimentKind::ALL.map(|k| k.as_str()).join(", ")
                ),
            );
        }
        let seed = sc.u64_opt("seed").unwrap_or(0);
        let description = sc.str_opt("description");
        sc.finish();

        let species = match section("species", false) {
            Some(s) => {
                let sp = SpeciesSpec {
                    name: s.str_opt("name").unwrap_or_else(|| "rb87".into()),
                    excited_decay_2pi_mhz: s.f64_opt("excited_decay_2pi_MHz"),
                };
                if sp.name != "rb87" {
                    s.err("name", format!("only \"rb87\" is available, got {:?}", sp.name));
                }
                s.finish();
                sp
            }
            None => SpeciesSpec { name: "rb87".into(), excited_decay_2pi_mhz: None },
        };

        let en = section("ensemble", true).unwrap_or_else(|| Section::new("ensemble", &empty, &errs));
        let ensemble = EnsembleSpec {
            optical_depth: en.f64_req("optical_depth"),
            temperature_uk: en.f64_or("temperature_uK", 0.0),
            length_mm: en.f64_or("length_mm", 2.0),
            magnetic_lifetime_ns: en.f64_opt("magnetic_lifetime_ns"),
            overlap_efficiency: en.f64_or("overlap_efficiency", 1.0),
        };
        en.finish();

        let geometry = section("geometry", false).map(|g| {
            let mut extinction_db = BTreeMap::new();
            if let Some(t) = g.subtable("extinction_dB") {
                for (k, v) in t {
                    if let Some(x) = g.as_f64(&format!("extinction_dB.{k}"), v) {
                        extinction_db.insert(k.clone(), x);
                    }
                }
            }
            let spec = GeometrySpec { angle_deg: g.f64_req("angle_deg"), extinction_db };
            g.finish();
            spec
        });

        let pr = section("probe", true).unwrap_or_else(|| Section::new("probe", &empty, &errs));
        let probe = ProbeSpec {
            shape: parse_shape(&pr, "shape", PulseShape::Gaussian),
            fwhm_ns: pr.f64_req("fwhm_ns"),
            center_ns: pr.f64_or("center_ns", 0.0),
            convention: match pr.str_opt("fwhm_convention").as_deref() {
                None | Some("intensity") => FwhmConvention::Intensity,
                Some("amplitude") => FwhmConvention::Amplitude,
                Some(other) => {
                    pr.err("fwhm_convention", format!("expected \"intensity\" or \"amplitude\", got {other:?}"));
                    FwhmConvention::Intensity
                }
            },
        };
        pr.finish();

        let co = section("control", true).unwrap_or_else(|| Section::new("control", &empty, &errs));
        let readout_times_ns = co.list_opt("readout_times_ns").unwrap_or_else(|| {
            if !co.table.contains_key("readout_times_ns") {
                co.err("readout_times_ns", "missing");
            }
            Vec::new()
        });
        let readout_areas_pi = co.list_opt("readout_areas_pi").unwrap_or_else(|| vec![2.0; readout_times_ns.len()]);
        let control = ControlSpec {
            shape: parse_shape(&co, "shape", PulseShape::Gaussian),
            fwhm_ns: co.f64_req("fwhm_ns"),
            write_area_pi: co.f64_or("write_area_pi", 2.0),
            readout_times_ns,
            readout_areas_pi,
            peak_rabi_2pi_mhz: co.f64_opt("peak_rabi_2pi_MHz"),
        };
        co.finish();

        let solver = section("solver", false)
            .map(|s| {
                let spec = SolverSpec {
                    n_z: s.u64_opt("n_z").map(|n| n as usize),
                    dt_ns: s.f64_opt("dt_ns"),
                    hold_shortcut: s.bool_opt("hold_shortcut"),
                    optical_decay_2pi_mhz: s.f64_opt("optical_decay_2pi_MHz"),
                };
                s.finish();
                spec
            })
            .unwrap_or_default();

        let detector = section("detector", false).map(|d| {
            let calibration = match d.str_opt("calibration").as_deref() {
                None | Some("published") => Calibration::Published,
                Some("noiseless") => Calibration::Noiseless,
                Some(other) => {
                    d.err("calibration", format!("expected \"published\" or \"noiseless\", got {other:?}"));
                    Calibration::Published
                }
            };
            let spec = DetectorSpec {
                calibration,
                downstream_transmission: d.f64_or("downstream_transmission", 0.1),
                dark_rate_cps: d.f64_opt("dark_rate_cps"),
                leakage_write: d.f64_opt("leakage_write"),
                leakage_read: d.f64_opt("leakage_read"),
                leakage_offset_ns: d.f64_opt("leakage_offset_ns"),
                leakage_fwhm_ns: d.f64_opt("leakage_fwhm_ns"),
                atom_noise_read: d.f64_opt("atom_noise_read"),
            };
            d.finish();
            spec
        });

        let trials = section("trials", false).map(|t| {
            let spec = TrialSpec {
                n_trials: t.u64_req("n_trials"),
                mean_photons_in: t.f64_or("mean_photons_in", 0.1),
                bin_width_ns: t.f64_or("bin_width_ns", 1.0),
                analysis_window_ns: t.f64_req("analysis_window_ns"),
                memory_efficiency: t.f64_opt("memory_efficiency"),
            };
            t.finish();
            spec
        });

        let sweep = section("sweep", false).map(|s| {
            let spec = SweepSpec {
                storage_times_ns: s.list_opt("storage_times_ns"),
                mean_photons_in: s.list_opt("mean_photons_in"),
                optical_depths: s.list_opt("optical_depths"),
                pulse_fwhms_ns: s.list_opt("pulse_fwhms_ns"),
                area_min_pi: s.f64_opt("area_min_pi"),
                area_max_pi: s.f64_opt("area_max_pi"),
                split_target: s.f64_opt("split_target"),
                split_tolerance: s.f64_opt("split_tolerance"),
            };
            for (key, list) in [
                ("storage_times_ns", &spec.storage_times_ns),
                ("mean_photons_in", &spec.mean_photons_in),
                ("optical_depths", &spec.optical_depths),
                ("pulse_fwhms_ns", &spec.pulse_fwhms_ns),
            ] {
                if list.as_ref().is_some_and(|l| l.is_empty()) {
                    s.err(key, "sweep list must not be empty");
                }
            }
            s.finish();
            spec
        });

        let mut errors = errs.into_inner();
        let Some(kind) = kind else {
            return Err(Error::Validation(errors));
        };
        let scenario = Scenario {
            name,
            kind,
            seed,
            description,
            species,
            ensemble,
            geometry,
            probe,
            control,
            solver,
            detector,
            trials,
            sweep,
        };
        if errors.is_empty() {
            errors.extend(scenario.semantic_errors());
        }
        if errors.is_empty() {
            Ok(scenario)
        } else {
            Err(Error::Validation(errors))
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Parse { detail, .. } => Error::Parse { path: path.to_path_buf(), detail },
            other => other,
        })
    }

    /// Section-level and physical invariants, all collected.
    fn semantic_errors(&self) -> Vec<String> {
        let mut e = Vec::new();
        let kind = self.kind.as_str();
        if self.name.trim().is_empty() {
            e.push("scenario.name: must not be empty".into());
        }
        let sweep = self.sweep.clone().unwrap_or_default();
        let mut need = |cond: bool, msg: &str| {
            if !cond {
                e.push(format!("{msg} (required for kind {kind})"));
            }
        };
        match self.kind {
            ExperimentKind::SingleRun => {
                need(self.trials.is_none() || self.detector.is_some(), "detector: missing section");
            }
            ExperimentKind::LifetimeSweep => {
                need(sweep.storage_times_ns.is_some(), "sweep.storage_times_ns: missing");
                need(self.trials.is_some(), "trials: missing section");
                need(self.detector.is_some(), "detector: missing section");
                need(self.control.readout_times_ns.len() == 1, "control.readout_times_ns: exactly one read-out");
            }
            ExperimentKind::SnrSweep => {
                need(sweep.mean_photons_in.is_some(), "sweep.mean_photons_in: missing");
                need(self.trials.is_some(), "trials: missing section");
                need(self.detector.is_some(), "detector: missing section");
            }
            ExperimentKind::NoiseBudget => {
                need(self.trials.is_some(), "trials: missing section");
                need(self.detector.is_some(), "detector: missing section");
            }
            ExperimentKind::BeamSplitter => {
                need(self.trials.is_some(), "trials: missing section");
                need(self.detector.is_some(), "detector: missing section");
                need(self.control.readout_times_ns.len() >= 2, "control.readout_times_ns: at least two read-outs");
            }
            ExperimentKind::EfficiencyVsDepth => {
                need(sweep.optical_depths.is_some(), "sweep.optical_depths: missing");
            }
            ExperimentKind::OptimizeControl => {
                need(sweep.area_min_pi.is_some(), "sweep.area_min_pi: missing");
                need(sweep.area_max_pi.is_some(), "sweep.area_max_pi: missing");
            }
        }
        if self.control.readout_areas_pi.len() != self.control.readout_times_ns.len() {
            e.push(format!(
                "control.readout_areas_pi: {} areas for {} read-out times",
                self.control.readout_areas_pi.len(),
                self.control.readout_times_ns.len()
            ));
        }
        let positive = |e: &mut Vec<String>, key: &str, v: Option<f64>| {
            if let Some(v) = v {
                if !(v > 0.0) {
                    e.push(format!("{key}: must be > 0, got {v}"));
                }
            }
        };
        let nonneg_list = |e: &mut Vec<String>, key: &str, v: &Option<Vec<f64>>| {
            for x in v.iter().flatten() {
                if !(*x >= 0.0) {
                    e.push(format!("{key}: entries must be >= 0, got {x}"));
                }
            }
        };
        nonneg_list(&mut e, "sweep.storage_times_ns", &sweep.storage_times_ns);
        nonneg_list(&mut e, "sweep.mean_photons_in", &sweep.mean_photons_in);
        nonneg_list(&mut e, "sweep.optical_depths", &sweep.optical_depths);
        for x in sweep.pulse_fwhms_ns.iter().flatten() {
            positive(&mut e, "sweep.pulse_fwhms_ns", Some(*x));
        }
        positive(&mut e, "sweep.area_min_pi", sweep.area_min_pi);
        if let (Some(lo), Some(hi)) = (sweep.area_min_pi, sweep.area_max_pi) {
            if hi < lo {
                e.push(format!("sweep.area_max_pi: {hi} is below the minimum {lo}"));
            }
        }
        if let Some(t) = sweep.split_target {
            if !(t > 0.0 && t < 1.0) {
                e.push(format!("sweep.split_target: must lie in (0, 1), got {t}"));
            }
        }
        positive(&mut e, "sweep.split_tolerance", sweep.split_tolerance);
        if let Some(t) = &self.trials {
            if let Some(eta) = t.memory_efficiency {
                if !(0.0..=1.0).contains(&eta) {
                    e.push(format!("trials.memory_efficiency: must lie in [0, 1], got {eta}"));
                }
            }
            if t.n_trials == 0 {
                e.push("trials.n_trials: must be >= 1".into());
            }
        }
        positive(&mut e, "solver.dt_ns", self.solver.dt_ns);

        // the constructors carry the remaining invariants
        let mut push = |r: Result<()>| {
            if let Err(err) = r {
                e.push(err.to_string());
            }
        };
        push(self.protocol_setup().map(|_| ()));
        if self.detector.is_some() {
            push(self.detector_model().map(|_| ()));
        }
        if self.trials.is_some() {
            push(self.trial_config(self.seed).map(|_| ()));
        }
        e
    }

    // -----------------------------------------------------------------------
    // building

    pub fn species_model(&self) -> Result<AtomSpecies<f64>> {
        let sp = AtomSpecies::rubidium87();
        match self.species.excited_decay_2pi_mhz {
            Some(g) => sp.with_excited_decay_rate(TWO_PI * g * 1e6),
            None => Ok(sp),
        }
    }

    pub fn ensemble_model(&self) -> Result<EnsembleParams<f64>> {
        let en = &self.ensemble;
        EnsembleParams::new(
            en.optical_depth,
            en.temperature_uk * 1e-6,
            en.length_mm * 1e-3,
            en.magnetic_lifetime_ns.map_or(f64::INFINITY, |t| t * 1e-9),
            en.overlap_efficiency,
        )
    }

    pub fn geometry_model(&self) -> Result<Option<BeamGeometry<f64>>> {
        let Some(g) = &self.geometry else { return Ok(None) };
        let species = self.species_model()?;
        let chain = g
            .extinction_db
            .iter()
            .map(|(label, &db)| ExtinctionStage { label: label.clone(), db })
            .collect();
        BeamGeometry::from_degrees(g.angle_deg, species.transition_wavelength, chain).map(Some)
    }

    pub fn decoherence_model(&self) -> Result<DecoherenceModel<f64>> {
        let species = self.species_model()?;
        let ensemble = self.ensemble_model()?;
        match self.geometry_model()? {
            Some(g) => DecoherenceModel::from_setup(&g, &species, &ensemble),
            None if ensemble.magnetic_lifetime.is_finite() => {
                DecoherenceModel::new(0.0, 0.0, ensemble.magnetic_lifetime)
            }
            None => Ok(DecoherenceModel::none()),
        }
    }

    pub fn probe_envelope(&self) -> Result<PulseEnvelope<f64>> {
        let p = &self.probe;
        PulseEnvelope::probe(p.shape, p.fwhm_ns * 1e-9, p.center_ns * 1e-9, p.convention)
    }

    /// Schedule with read-out centres at the given times after the probe.
    pub fn schedule_with_times(&self, readout_times_ns: &[f64]) -> Result<ControlSchedule<f64>> {
        let c = &self.control;
        let t0 = self.probe.center_ns * 1e-9;
        let fwhm = c.fwhm_ns * 1e-9;
        let write = PulseEnvelope::control_with_area(c.shape, fwhm, t0, c.write_area_pi * PI)?;
        let readouts = readout_times_ns
            .iter()
            .zip(&c.readout_areas_pi)
            .map(|(&t, &a)| {
                Ok(Readout {
                    envelope: PulseEnvelope::control_with_area(c.shape, fwhm, t0 + t * 1e-9, a * PI)?,
                    target_area: a * PI,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let s = if self.kind == ExperimentKind::BeamSplitter {
            ControlSchedule::new(write, readouts)?
        } else {
            ControlSchedule::relaxed(write, readouts)?
        };
        match c.peak_rabi_2pi_mhz {
            Some(p) => s.with_uniform_peak(TWO_PI * p * 1e6),
            None => Ok(s),
        }
    }

    pub fn protocol_setup(&self) -> Result<ProtocolSetup<f64>> {
        self.protocol_setup_with_times(&self.control.readout_times_ns)
    }

    pub fn protocol_setup_with_times(&self, readout_times_ns: &[f64]) -> Result<ProtocolSetup<f64>> {
        let mut setup = ProtocolSetup::new(
            self.ensemble_model()?,
            self.species_model()?,
            self.probe_envelope()?,
            self.schedule_with_times(readout_times_ns)?,
            self.decoherence_model()?,
        );
        if self.solver.n_z.is_some() || self.solver.dt_ns.is_some() {
            let n_z = self.solver.n_z.unwrap_or(setup.grid.n_z);
            let dt = self.solver.dt_ns.map_or(setup.grid.dt, |d| d * 1e-9);
            setup.grid = SolverGrid::new(n_z, dt)?;
        }
        if let Some(h) = self.solver.hold_shortcut {
            setup.options.hold_shortcut = h;
        }
        if let Some(g) = self.solver.optical_decay_2pi_mhz {
            if !(g >= 0.0) {
                return Err(Error::Config(format!("solver.optical_decay_2pi_MHz must be >= 0, got {g}")));
            }
            setup.options.optical_decay_override = Some(TWO_PI * g * 1e6);
        }
        Ok(setup)
    }

    pub fn detector_model(&self) -> Result<DetectorModel> {
        let d = self
            .detector
            .as_ref()
            .ok_or_else(|| Error::Config("scenario has no detector section".into()))?;
        let mut m = match d.calibration {
            Calibration::Published => DetectorModel::calibrate(&NoiseCalibration::PUBLISHED, d.downstream_transmission)?,
            Calibration::Noiseless => DetectorModel::noiseless(d.downstream_transmission),
        };
        m.downstream_transmission = d.downstream_transmission;
        if let Some(v) = d.dark_rate_cps {
            m.dark_ambient_rate = v;
        }
        if let Some(v) = d.leakage_write {
            m.leakage_write = v;
        }
        if let Some(v) = d.leakage_read {
            m.leakage_read = v;
        }
        if let Some(v) = d.leakage_offset_ns {
            m.leakage_time_offset = v * 1e-9;
        }
        if let Some(v) = d.leakage_fwhm_ns {
            m.leakage_spread_fwhm = v * 1e-9;
        }
        if let Some(v) = d.atom_noise_read {
            m.atom_noise_read = v;
        }
        m.validate()?;
        Ok(m)
    }

    pub fn trial_config(&self, seed: u64) -> Result<TrialConfig> {
        let t = self
            .trials
            .as_ref()
            .ok_or_else(|| Error::Config("scenario has no trials section".into()))?;
        let c = TrialConfig {
            n_trials: t.n_trials,
            mean_photons_in: t.mean_photons_in,
            bin_width: t.bin_width_ns * 1e-9,
            analysis_window: t.analysis_window_ns * 1e-9,
            rng_seed: seed,
        };
        c.validate()?;
        Ok(c)
    }

    // -----------------------------------------------------------------------
    // writing

    /// Canonical TOML; parsing it back gives an equal scenario.
    pub fn to_toml_string(&self) -> String {
        fn f(x: f64) -> Value {
            Value::Float(x)
        }
        fn list(xs: &[f64]) -> Value {
            Value::Array(xs.iter().map(|&x| f(x)).collect())
        }
        fn put<V: Into<Value>>(t: &mut Table, k: &str, v: Option<V>) {
            if let Some(v) = v {
                t.insert(k.into(), v.into());
            }
        }
        let mut root = Table::new();

        let mut sc = Table::new();
        sc.insert("name".into(), self.name.clone().into());
        sc.insert("kind".into(), self.kind.as_str().into());
        sc.insert("seed".into(), Value::Integer(self.seed as i64));
        put(&mut sc, "description", self.description.clone());
        root.insert("scenario".into(), sc.into());

        let mut sp = Table::new();
        sp.insert("name".into(), self.species.name.clone().into());
        put(&mut sp, "excited_decay_2pi_MHz", self.species.excited_decay_2pi_mhz.map(f));
        root.insert("species".into(), sp.into());

        let en = &self.ensemble;
        let mut t = Table::new();
        t.insert("optical_depth".into(), f(en.optical_depth));
        t.insert("temperature_uK".into(), f(en.temperature_uk));
        t.insert("length_mm".into(), f(en.length_mm));
        put(&mut t, "magnetic_lifetime_ns", en.magnetic_lifetime_ns.map(f));
        t.insert("overlap_efficiency".into(), f(en.overlap_efficiency));
        root.insert("ensemble".into(), t.into());

        if let Some(g) = &self.geometry {
            let mut t = Table::new();
            t.insert("angle_deg".into(), f(g.angle_deg));
            if !g.extinction_db.is_empty() {
                let ext: Table = g.extinction_db.iter().map(|(k, &v)| (k.clone(), f(v))).collect();
                t.insert("extinction_dB".into(), ext.into());
            }
            root.insert("geometry".into(), t.into());
        }

        let p = &self.probe;
        let mut t = Table::new();
        t.insert("shape".into(), shape_str(p.shape).into());
        t.insert("fwhm_ns".into(), f(p.fwhm_ns));
        t.insert("center_ns".into(), f(p.center_ns));
        let conv = match p.convention {
            FwhmConvention::Intensity => "intensity",
            FwhmConvention::Amplitude => "amplitude",
        };
        t.insert("fwhm_convention".into(), conv.into());
        root.insert("probe".into(), t.into());

        let c = &self.control;
        let mut t = Table::new();
        t.insert("shape".into(), shape_str(c.shape).into());
        t.insert("fwhm_ns".into(), f(c.fwhm_ns));
        t.insert("write_area_pi".into(), f(c.write_area_pi));
        t.insert("readout_times_ns".into(), list(&c.readout_times_ns));
        t.insert("readout_areas_pi".into(), list(&c.readout_areas_pi));
        put(&mut t, "peak_rabi_2pi_MHz", c.peak_rabi_2pi_mhz.map(f));
        root.insert("control".into(), t.into());

        let s = &self.solver;
        if *s != SolverSpec::default() {
            let mut t = Table::new();
            put(&mut t, "n_z", s.n_z.map(|n| Value::Integer(n as i64)));
            put(&mut t, "dt_ns", s.dt_ns.map(f));
            put(&mut t, "hold_shortcut", s.hold_shortcut);
            put(&mut t, "optical_decay_2pi_MHz", s.optical_decay_2pi_mhz.map(f));
            root.insert("solver".into(), t.into());
        }

        if let Some(d) = &self.detector {
            let mut t = Table::new();
            let cal = match d.calibration {
                Calibration::Published => "published",
                Calibration::Noiseless => "noiseless",
            };
            t.insert("calibration".into(), cal.into());
            t.insert("downstream_transmission".into(), f(d.downstream_transmission));
            put(&mut t, "dark_rate_cps", d.dark_rate_cps.map(f));
            put(&mut t, "leakage_write", d.leakage_write.map(f));
            put(&mut t, "leakage_read", d.leakage_read.map(f));
            put(&mut t, "leakage_offset_ns", d.leakage_offset_ns.map(f));
            put(&mut t, "leakage_fwhm_ns", d.leakage_fwhm_ns.map(f));
            put(&mut t, "atom_noise_read", d.atom_noise_read.map(f));
            root.insert("detector".into(), t.into());
        }

        if let Some(tr) = &self.trials {
            let mut t = Table::new();
            t.insert("n_trials".into(), Value::Integer(tr.n_trials as i64));
            t.insert("mean_photons_in".into(), f(tr.mean_photons_in));
            t.insert("bin_width_ns".into(), f(tr.bin_width_ns));
            t.insert("analysis_window_ns".into(), f(tr.analysis_window_ns));
            put(&mut t, "memory_efficiency", tr.memory_efficiency.map(f));
            root.insert("trials".into(), t.into());
        }

        if let Some(sw) = &self.sweep {
            let mut t = Table::new();
            put(&mut t, "storage_times_ns", sw.storage_times_ns.as_deref().map(list));
            put(&mut t, "mean_photons_in", sw.mean_photons_in.as_deref().map(list));
            put(&mut t, "optical_depths", sw.optical_depths.as_deref().map(list));
            put(&mut t, "pulse_fwhms_ns", sw.pulse_fwhms_ns.as_deref().map(list));
            put(&mut t, "area_min_pi", sw.area_min_pi.map(f));
            put(&mut t, "area_max_pi", sw.area_max_pi.map(f));
            put(&mut t, "split_target", sw.split_target.map(f));
            put(&mut t, "split_tolerance", sw.split_tolerance.map(f));
            root.insert("sweep".into(), t.into());
        }

        toml::to_string(&root).expect("plain tables always serialize")
    }
}
