//! Free multi-photon and multi-fermion dynamics in factorized form.
//!
//! The N-particle Hamiltonian is a sum of one-particle terms, so a state
//! `Ψ = Σ_α C_α ⊗_j ψ_{α_j}` evolves by propagating the single-particle modes
//! with the exact Fourier-space propagator while the coefficient tensor stays
//! fixed. Joint densities and multi-velocity fields are assembled on demand.

mod algebra;
mod certify;
mod continuity;
mod density;
mod grid;
mod mode;
mod operators;
mod run;
mod state;

use thiserror::Error;

pub use algebra::{
    check_subluminality_algebra, fermion_identity_residual, fermion_inequality_terms, photon_inequality_terms, AlgebraReport,
};
pub use certify::{
    boost_measure, certify_causal_evolution, certify_measures, certify_supports, common_block, escaped_mass,
    snapshot_to_measure, support_cells, supports_to_measures, Certification, CertificationReport, CertifyOptions,
    PairReport, SupportCells,
};
pub use continuity::continuity_residual;
pub use density::{assemble_density, boundary_mass_fraction, max_cells_budget, DensitySnapshot, JointAxis};
pub use grid::{Fft3, GridSpec};
pub use mode::{evolve_mode, PacketSpec, Propagator, SingleParticleMode};
pub use operators::{
    fermion_propagator, fermion_velocity_operators, gamma_matrices, photon_propagator, photon_velocity_operators,
    spin_matrices, SmallMatrix,
};
pub use run::{run_simulation, SimulationConfig, SimulationRun, StepRecord};
pub use state::marginal_density;
pub use state::FactorizedWaveState;

pub use num_complex::Complex64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WaveError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("non-finite field values")]
    NonFinite,
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("joint grid of {cells} cells exceeds the budget of {budget}; increase the coarsening factor")]
    Budget { cells: usize, budget: usize },
    #[error("snapshots are not on the same grid: {0}")]
    GridMismatch(String),
    #[error("thresholded support is empty")]
    EmptySupport,
    #[error(transparent)]
    Measure(#[from] crate::measure::MeasureError),
    #[error("output failed: {0}")]
    Io(String),
    #[error(transparent)]
    Order(#[from] crate::order::OrderError),
}

/// Particle species and its one-particle Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Species {
    /// Six-component photon wave function (both helicities).
    Photon,
    /// Four-component Dirac spinor of the given mass.
    Fermion { mass: f64 },
}

impl Species {
    pub fn components(&self) -> usize {
        match self {
            Species::Photon => 6,
            Species::Fermion { .. } => 4,
        }
    }

    /// The three operators `O_k` with `v^k = c Ψ†O_kΨ / Ψ†Ψ`.
    pub fn velocity_operators(&self) -> [SmallMatrix; 3] {
        match self {
            Species::Photon => photon_velocity_operators(),
            Species::Fermion { .. } => fermion_velocity_operators(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Species::Photon => "photon",
            Species::Fermion { .. } => "fermion",
        }
    }
}
