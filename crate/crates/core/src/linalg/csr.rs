use super::LinalgError;

/// Square compressed-sparse-row matrix with sorted, unique column indices per row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicate entries; explicit zeros are kept so the pattern reflects
    /// what was assembled.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Result<Self, LinalgError> {
        for &(i, j, _) in triplets {
            if i >= dim || j >= dim {
                return Err(LinalgError::IndexOutOfRange { row: i, col: j, dim });
            }
        }
        let mut sorted = triplets.to_vec();
        // Stable sort: duplicates are summed in insertion order, so the result does
        // not depend on how the triplets were produced as long as the list is the same.
        sorted.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0; dim + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            dim,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: (0..=dim).collect(),
            col_idx: (0..dim).collect(),
            values: vec![1.0; dim],
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::identity(diag.len());
        m.values.copy_from_slice(diag);
        m
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let dim = rows.len();
        let triplets: Vec<_> = rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| {
                r.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(move |(j, &v)| (i, j, v))
            })
            .collect();
        Self::from_triplets(dim, &triplets).expect("indices are in range")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.dim]; self.dim];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        (0..self.dim).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn transpose(&self) -> Self {
        let triplets: Vec<_> = (0..self.dim)
            .flat_map(|i| self.row(i).map(move |(j, v)| (j, i, v)))
            .collect();
        Self::from_triplets(self.dim, &triplets).expect("same dimension")
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, alpha: f64, other: &Self) -> Result<Self, LinalgError> {
        if other.dim != self.dim {
            return Err(LinalgError::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let mut triplets: Vec<_> = (0..self.dim)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .collect();
        triplets.extend((0..other.dim).flat_map(|i| other.row(i).map(move |(j, v)| (i, j, alpha * v))));
        Self::from_triplets(self.dim, &triplets)
    }

    /// Largest `|a_ij − a_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        (0..self.dim)
            .flat_map(|i| self.row(i).map(move |(j, v)| (v - self.get(j, i)).abs()))
            .fold(0.0, f64::max)
    }

    /// Infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 0, 2.0)]).unwrap();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 0), 3.0);
    }

    #[test]
    fn empty_triplets() {
        let m = CsrMatrix::from_triplets(3, &[]).unwrap();
        assert_eq!(m.nnz(), 0);
        assert_eq!(m.row_ptr(), &[0, 0, 0, 0]);
        assert_eq!(m.matvec(&[1.0, 2.0, 3.0]), vec![0.0; 3]);
    }

    #[test]
    fn out_of_range_index() {
        assert_eq!(
            CsrMatrix::from_triplets(2, &[(0, 2, 1.0)]).unwrap_err(),
            LinalgError::IndexOutOfRange { row: 0, col: 2, dim: 2 }
        );
    }

    #[test]
    fn dense_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let dense: Vec<Vec<f64>> = (0..10)
            .map(|_| {
                (0..10)
                    .map(|_| if rng.gen_bool(0.3) { rng.gen_range(-1.0..1.0) } else { 0.0 })
                    .collect()
            })
            .collect();
        let m = CsrMatrix::from_dense(&dense);
        assert_eq!(m.to_dense(), dense);
        for i in 0..10 {
            let cols: Vec<usize> = m.row(i).map(|(j, _)| j).collect();
            assert!(cols.windows(2).all(|w| w[0] < w[1]));
        }
        assert_eq!(m.transpose().transpose(), m);
    }

    #[test]
    fn add_scaled_and_symmetry() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 0.0]]);
        assert_eq!(a.max_asymmetry(), 0.0);
        let b = CsrMatrix::identity(2);
        let c = a.add_scaled(-3.0, &b).unwrap();
        assert_eq!(c.to_dense(), vec![vec![-2.0, 2.0], vec![2.0, -3.0]]);
        assert_eq!(c.norm_inf(), 5.0);
    }
}
