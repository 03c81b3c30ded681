//! Incompressible flow around a circular cylinder with paired synthetic jets.

pub mod checkpoint;
pub mod config;
pub mod diagnostics;
pub mod geometry;
pub mod grid;
pub mod ib;
pub mod jets;
pub mod poisson;
pub mod solver;
pub mod verification;
pub mod witness;

use thiserror::Error;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, CheckpointError};
pub use config::{JetConfig, SimConfig, DIAMETER, RHO, U_INF};
pub use diagnostics::{compute_cp, compute_forces, CpProfile, ForceRecord};
pub use geometry::{build_domain, Boundaries, DomainGeometry};
pub use grid::Field2;
pub use jets::{jet_velocity, JetSide};
pub use solver::{FlowField, Simulation, StepReport};
pub use witness::{neighbor_observations, WitnessLayout, N_WITNESS, OBS_LEN};

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("pressure solve did not converge after {iterations} iterations (relative residual {residual:e})")]
    PoissonNotConverged { iterations: usize, residual: f64 },
    #[error("non-finite flow state at t = {t}")]
    NonFinite { t: f64 },
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

impl FlowError {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            FlowError::PoissonNotConverged { .. } | FlowError::NonFinite { .. }
        )
    }
}
