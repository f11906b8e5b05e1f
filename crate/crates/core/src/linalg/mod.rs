//! Sparse storage, direct solves and the shift-invert eigensolver.

mod csr;
mod eigen;
mod lu;

pub use csr::CsrMatrix;
pub use eigen::{pencil_residual, shift_invert_eigensolve, EigenOptions, EigenPair};
pub use lu::SparseLu;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("entry ({row}, {col}) outside a {dim}×{dim} matrix")]
    IndexOutOfRange { row: usize, col: usize, dim: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("singular pivot at row {row}")]
    SingularPivot { row: usize },
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("dense eigensolver failed: {0}")]
    DenseEigen(String),
    #[error("eigensolver did not converge in {iterations} restarts (best residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("Arnoldi breakdown persisted after restarting from a perturbed vector")]
    Breakdown,
    #[error("eigenvalue {re} + {im}i has a non-negligible imaginary part")]
    ComplexEigenvalue { re: f64, im: f64 },
    #[error("the operator (K − sD)⁻¹D has no finite eigenvalues")]
    EmptyRange,
}
