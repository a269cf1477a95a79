//! Finite-element solver and verification harness for poroelastic media
//! containing a thin fracture.
//!
//! The crate solves the transient Biot equations on a fixed transformed
//! geometry (two bulk blocks plus a rescaled fracture strip), where the
//! dependence on the fracture width-to-length ratio `eps` lives entirely in
//! the coefficients. It also solves the asymptotic limit models for the
//! five hydraulic and two elastic regimes and provides the error studies
//! that compare the two.

pub mod config;
pub mod effective;
pub mod exponents;
pub mod full_solver;
pub mod geometry;
pub mod limit_solver;
pub mod linalg;
pub mod materials;
pub mod mesh;
pub mod norms;
pub mod spaces;
pub mod study;

mod assembly;

pub use assembly::{
    apply_constraints, assemble, assemble_load, eval_scaled_gradient, FormKind, FormSpec,
    SparseSystem,
};
pub use config::RunConfig;
pub use effective::{
    average_fracture, average_normal, compute_effective, ColumnField, EffectiveParams,
};
pub use exponents::{
    validate_exponents, FlowRegime, MechRegime, Ratio, RegimeDescriptor, ScalingExponents,
};
pub use full_solver::{
    solve_initial_displacement, solve_transient, solve_transient_schur, BiotRunConfig, EpsilonTag,
    TransientSolution,
};
pub use geometry::{Aperture, BoundarySegment, FlowBc, Geometry, Rect};
pub use limit_solver::{
    build_limit_problem, reconstruct_fracture_displacement, reconstruct_fracture_pressure,
    solve_limit, FlowForm, LimitProblem, LimitStepper, MechForm,
};
pub use materials::{Elastic4, MaterialFields};
pub use mesh::{build_mesh, FracturedMesh, Subdomain};
pub use norms::{FieldSet, NormKind};
pub use spaces::{build_space, SpaceDescriptor, SpaceKind};
pub use study::{
    check_apriori, check_equivalence, check_trace_decay, run_sweep, ErrorReport, SweepConfig,
};

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("mesh: {0}")]
    Mesh(String),
    #[error("{0}")]
    ScalingAssumption(String),
    #[error("space: {0}")]
    Space(String),
    #[error("assembly: {0}")]
    Assembly(String),
    #[error("materials: {0}")]
    Materials(String),
    #[error("solver: {0}")]
    Solver(String),
    #[error("limit model: {0}")]
    Limit(String),
    #[error("study: {0}")]
    Study(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
