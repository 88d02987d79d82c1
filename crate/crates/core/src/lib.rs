//! Simulation and analysis of Autler–Townes-splitting optical quantum
//! memories in cold Λ-type atomic ensembles.
//!
//! The physics modules are generic over the scalar type ([`num::Real`]);
//! the aliases below fix them to `f64`, which is what the harness and the
//! detection statistics use.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decoherence;
pub mod detection;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod num;
pub mod physics;
pub mod pulse;
pub mod solver;

pub use error::{Error, Result};

pub type AtomSpecies = physics::AtomSpecies<f64>;
pub type EnsembleParams = physics::EnsembleParams<f64>;
pub type PulseEnvelope = pulse::PulseEnvelope<f64>;
pub type ControlSchedule = pulse::ControlSchedule<f64>;
pub type BeamGeometry = geometry::BeamGeometry<f64>;
pub type DecoherenceModel = decoherence::DecoherenceModel<f64>;
pub type SolverGrid = solver::SolverGrid<f64>;
pub type SimulationResult = solver::SimulationResult<f64>;
pub type ProtocolSetup = solver::ProtocolSetup<f64>;

/// Single-precision variants for fast exploratory sweeps.
pub mod f32 {
    pub type AtomSpecies = crate::physics::AtomSpecies<f32>;
    pub type EnsembleParams = crate::physics::EnsembleParams<f32>;
    pub type PulseEnvelope = crate::pulse::PulseEnvelope<f32>;
    pub type ControlSchedule = crate::pulse::ControlSchedule<f32>;
    pub type DecoherenceModel = crate::decoherence::DecoherenceModel<f32>;
    pub type ProtocolSetup = crate::solver::ProtocolSetup<f32>;
}
