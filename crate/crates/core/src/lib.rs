//! Adaptive mixed finite elements for the Stokes eigenvalue problem.
//!
//! The pseudostress `σ = 2μ∇u − pI` is approximated row-wise with lowest-order
//! Raviart–Thomas elements, pressure and velocity with piecewise constants.
//! Residual indicators (`θ` for the pseudostress–velocity scheme, `η` for the
//! pseudostress–pressure–velocity scheme) drive a solve–estimate–mark–refine loop
//! on conforming triangulations refined by newest-vertex bisection.

#![allow(clippy::needless_range_loop, clippy::excessive_precision)]

pub mod adaptivity;
pub mod assembly;
pub mod estimators;
pub mod fe;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod verify;

pub use adaptivity::{
    effectivity, fit_rate, mark_elements, reference_eigenvalue, run_campaign, ConvergenceTable,
    EstimatorKind, IterationRecord, RefineMode, RunConfig,
};
pub use assembly::{assemble_full, assemble_reduced, assemble_velocity_mass, AssembledSystem, Scheme};
pub use estimators::{
    compute_eta, compute_theta, postprocess_velocity, IndicatorField, PostprocessedVelocity,
    SpectralSolution,
};
pub use fe::DofMap;
pub use linalg::{shift_invert_eigensolve, CsrMatrix, EigenOptions, EigenPair, SparseLu};
pub use mesh::{generate_domain, Domain, GeometryTables, Mesh};
pub use io::{parse_config, write_csv_table, write_vtk, ConfigOverrides, IoError};

/// Spatial dimension. The forms carry explicit factors of `n`.
pub const DIM: usize = 2;
