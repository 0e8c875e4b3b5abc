//! Causal precedence of multi-particle probability measures on the
//! N-particle Minkowski configuration spacetime.
//!
//! The crate is organized bottom-up:
//!
//! - [`spacetime`]: exact point predicates and future sets of compact regions.
//! - [`measure`]: finitely supported slice measures and their constructors.
//! - [`order`]: deciding `μ ⪯ ν` by max-flow, with witnesses and violators.
//! - [`curves`]: trajectory measures reconstructed from causal evolutions.
//! - [`wave`]: spectral multi-photon / multi-fermion simulators and their
//!   causality certification.
//! - [`format`]: JSON and binary file formats shared with the CLI.

pub mod curves;
pub mod flow;
pub mod format;
pub mod generate;
pub mod mass;
pub mod measure;
pub mod order;
pub mod seed;
pub mod spacetime;
pub mod validation;
pub mod wave;

pub use curves::{build_trajectory_measure, verify_causal_evolution, verify_causal_evolution_with, CurveError, Trajectory, TrajectoryMeasure};
pub use mass::{Mass, Rational};
pub use measure::{particle_marginal, product_measure, symmetrize, Evolution, MeasureError, SliceMeasure};
pub use order::{
    oracle_subset_condition, precedes_measures, precedes_measures_with, Coupling, OrderError, PrecedenceCertificate,
    SubsetVerdict, Violator,
};
pub use spacetime::{
    chronologically_precedes_point, future_contains, precedes_point, slice_future_region, CausalPredicate,
    CompactRegion, ConfigEvent, GeometryError, ModelParams,
};
