use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, MatMut};

use super::{CsrMatrix, LinalgError};

/// Sparse LU with partial pivoting and a COLAMD fill-reducing column ordering.
///
/// The CSR arrays of `A` are handed to faer as the CSC arrays of `Aᵀ`; solves with
/// `A` then go through the transposed triangular solves.
pub struct SparseLu {
    dim: usize,
    lu: Lu<usize, f64>,
}

impl SparseLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self, LinalgError> {
        let n = a.dim();
        let symbolic = SymbolicSparseColMatRef::new_checked(n, n, a.row_ptr(), None, a.col_idx());
        let at = SparseColMatRef::new(symbolic, a.values());
        let sym = SymbolicLu::try_new(at.symbolic()).map_err(|e| LinalgError::Factorization(format!("{e:?}")))?;
        let lu = Lu::try_new_with_symbolic(sym, at).map_err(|e| match e {
            faer::sparse::linalg::LuError::SymbolicSingular { index } => LinalgError::SingularPivot { row: index },
            other => LinalgError::Factorization(format!("{other:?}")),
        })?;
        let this = Self { dim: n, lu };
        // A vanishing numeric pivot shows up as non-finite output.
        this.solve(&vec![1.0; n])?;
        Ok(this)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if b.len() != self.dim {
            return Err(LinalgError::DimensionMismatch {
                expected: self.dim,
                found: b.len(),
            });
        }
        let mut x = b.to_vec();
        self.lu
            .solve_transpose_in_place_with_conj(Conj::No, MatMut::from_column_major_slice_mut(&mut x, self.dim, 1));
        if let Some(row) = x.iter().position(|v| !v.is_finite()) {
            return Err(LinalgError::SingularPivot { row });
        }
        Ok(x)
    }
}
