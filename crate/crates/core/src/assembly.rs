//! Sparse saddle-point systems for the full and reduced discrete eigenproblems.
//!
//! Both are written as the pencil `K X = λ D X` with `D = blockdiag(0, …, −M, 0)`
//! so that the eigenvalues of interest are positive.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fe::{quadrature_rule, DofMap, Rt0Element};
use crate::linalg::{pencil_residual, shift_invert_eigensolve, CsrMatrix, EigenOptions, EigenPair, LinalgError};
use crate::mesh::Mesh;

#[derive(Debug, Error, PartialEq)]
pub enum AssemblyError {
    #[error("viscosity must be positive and finite, got {0}")]
    BadViscosity(f64),
    #[error("dof map was built for a different mesh")]
    DofMapMismatch,
    #[error("triangle {0} has non-positive area {1}")]
    Degenerate(usize, f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Which discrete problem to assemble.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Pseudostress, pressure and velocity.
    Full,
    /// Pseudostress and velocity, pressure eliminated through `p = −tr(σ)/2`.
    Reduced,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Full => "full",
            Scheme::Reduced => "reduced",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(Scheme::Full),
            "reduced" => Ok(Scheme::Reduced),
            _ => Err(format!("unknown scheme '{s}' (expected full or reduced)")),
        }
    }
}

/// Offsets of the unknown blocks in the global vector.
///
/// Velocity component `k` on triangle `t` sits at `velocity + k·n_triangles + t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockLayout {
    pub n_sigma: usize,
    pub n_triangles: usize,
    pub pressure: Option<usize>,
    pub velocity: usize,
    pub multiplier: usize,
    pub dim: usize,
}

impl BlockLayout {
    pub fn new(dofmap: &DofMap, scheme: Scheme) -> Self {
        let n_sigma = dofmap.n_sigma();
        let nt = dofmap.n_triangles();
        let (pressure, velocity) = match scheme {
            Scheme::Full => (Some(n_sigma), n_sigma + nt),
            Scheme::Reduced => (None, n_sigma),
        };
        let multiplier = velocity + 2 * nt;
        Self {
            n_sigma,
            n_triangles: nt,
            pressure,
            velocity,
            multiplier,
            dim: multiplier + 1,
        }
    }

    pub fn scheme(&self) -> Scheme {
        if self.pressure.is_some() {
            Scheme::Full
        } else {
            Scheme::Reduced
        }
    }

    pub fn velocity_dof(&self, k: usize, t: usize) -> usize {
        self.velocity + k * self.n_triangles + t
    }
}

#[derive(Clone, Debug)]
pub struct AssembledSystem {
    pub k: CsrMatrix,
    /// The singular right-hand side `blockdiag(0, −M, 0)`.
    pub d: CsrMatrix,
    /// Velocity mass diagonal, component-major like the velocity block.
    pub m: Vec<f64>,
    pub layout: BlockLayout,
    pub mu: f64,
    /// Null vector of `K` once the multiplier is dropped: the identity tensor
    /// (with unit negative pressure in the full scheme).
    pub kernel: Vec<f64>,
}

impl AssembledSystem {
    pub fn scheme(&self) -> Scheme {
        self.layout.scheme()
    }

    /// Eigenpairs of `K X = λ D X` closest to `opts.shift`.
    ///
    /// The multiplier row couples every flux dof and ruins the sparsity of the
    /// factors, so the solve runs on a gauged pencil: the multiplier and one dof
    /// on which the null vector is nonzero are replaced by identity rows. Testing
    /// the eigen equation with the null vector shows the multiplier vanishes, so
    /// adding the right multiple of the null vector afterwards restores
    /// `∫_Ω tr(σ_h) = 0` and yields eigenpairs of the original pencil.
    pub fn eigensolve(&self, opts: &EigenOptions) -> Result<Vec<EigenPair>, LinalgError> {
        let n = self.layout.dim;
        let mult = self.layout.multiplier;
        let pin = self.gauge_dof();
        let drop = |i: usize| i == mult || i == pin;
        let mut trip = Vec::with_capacity(self.k.nnz());
        for i in 0..n {
            if drop(i) {
                trip.push((i, i, 1.0));
                continue;
            }
            trip.extend(self.k.row(i).filter(|&(j, _)| !drop(j)).map(|(j, v)| (i, j, v)));
        }
        let gauged = CsrMatrix::from_triplets(n, &trip)?;
        let c: Vec<(usize, f64)> = self.k.row(mult).collect();
        let cz: f64 = c.iter().map(|&(j, v)| v * self.kernel[j]).sum();
        let mut pairs = shift_invert_eigensolve(&gauged, &self.d, opts)?;
        for p in &mut pairs {
            let cx: f64 = c.iter().map(|&(j, v)| v * p.vector[j]).sum();
            let alpha = -cx / cz;
            for (x, z) in p.vector.iter_mut().zip(&self.kernel) {
                *x += alpha * z;
            }
            p.vector[mult] = 0.0;
            p.residual = pencil_residual(&self.k, &self.d, p.lambda, &p.vector);
        }
        Ok(pairs)
    }

    /// Pressure on the first triangle (full scheme) or the flux dof where the
    /// null vector is largest (reduced scheme).
    fn gauge_dof(&self) -> usize {
        match self.layout.pressure {
            Some(p) => p,
            None => {
                let mut best = 0;
                for j in 0..self.layout.n_sigma {
                    if self.kernel[j].abs() > self.kernel[best].abs() {
                        best = j;
                    }
                }
                best
            }
        }
    }
}

/// Assembles the pseudostress–pressure–velocity system.
pub fn assemble_full(mesh: &Mesh, dofmap: &DofMap, mu: f64) -> Result<AssembledSystem, AssemblyError> {
    assemble(mesh, dofmap, mu, Scheme::Full)
}

/// Assembles the pseudostress–velocity system.
pub fn assemble_reduced(mesh: &Mesh, dofmap: &DofMap, mu: f64) -> Result<AssembledSystem, AssemblyError> {
    assemble(mesh, dofmap, mu, Scheme::Reduced)
}

/// Diagonal of the piecewise-constant velocity mass matrix, component-major.
pub fn assemble_velocity_mass(mesh: &Mesh, dofmap: &DofMap) -> Result<Vec<f64>, AssemblyError> {
    if !dofmap.matches(mesh) {
        return Err(AssemblyError::DofMapMismatch);
    }
    let areas: Vec<f64> = (0..mesh.n_triangles()).map(|t| mesh.area(t)).collect();
    if let Some((t, &a)) = areas.iter().enumerate().find(|(_, &a)| !(a > 0.0)) {
        return Err(AssemblyError::Degenerate(t, a));
    }
    Ok([areas.clone(), areas].concat())
}

fn assemble(mesh: &Mesh, dofmap: &DofMap, mu: f64, scheme: Scheme) -> Result<AssembledSystem, AssemblyError> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(AssemblyError::BadViscosity(mu));
    }
    let m = assemble_velocity_mass(mesh, dofmap)?;
    let layout = BlockLayout::new(dofmap, scheme);
    let nt = mesh.n_triangles();
    let inv = 1.0 / (2.0 * mu);
    let rule = quadrature_rule(2).expect("degree 2 is supported");

    let mut trip = Vec::with_capacity(nt * 80);
    for t in 0..nt {
        let el = Rt0Element::new(mesh, t);
        let dofs = [dofmap.local_sigma_dofs(t, 0), dofmap.local_sigma_dofs(t, 1)];

        // mass[i][j] = ∫ φ_i·φ_j, comp[c][i][j] = ∫ (φ_i)_c (φ_j)_c, cross[i][j] = ∫ (φ_i)_0 (φ_j)_1,
        // mean[c][i] = ∫ (φ_i)_c.
        let mut comp = [[[0.0; 3]; 3]; 2];
        let mut cross = [[0.0; 3]; 3];
        let mut mean = [[0.0; 3]; 2];
        for (x, w) in rule.on_triangle(&el.points) {
            let v = [0, 1, 2].map(|i| el.value(i, x));
            for i in 0..3 {
                for c in 0..2 {
                    mean[c][i] += w * v[i][c];
                }
                for j in 0..3 {
                    for c in 0..2 {
                        comp[c][i][j] += w * v[i][c] * v[j][c];
                    }
                    cross[i][j] += w * v[i][0] * v[j][1];
                }
            }
        }
        let mass = |i: usize, j: usize| comp[0][i][j] + comp[1][i][j];

        for r in 0..2 {
            for i in 0..3 {
                for j in 0..3 {
                    let mut a = mass(i, j);
                    if scheme == Scheme::Reduced {
                        a -= 0.5 * comp[r][i][j];
                    }
                    trip.push((dofs[r][i], dofs[r][j], inv * a));
                }
            }
        }
        match layout.pressure {
            Some(p0) => {
                let p = p0 + t;
                for r in 0..2 {
                    for i in 0..3 {
                        let v = inv * mean[r][i];
                        trip.push((dofs[r][i], p, v));
                        trip.push((p, dofs[r][i], v));
                    }
                }
                trip.push((p, p, 2.0 * inv * el.area));
            }
            None => {
                // −½ ∫ tr ξ tr τ between the two rows.
                for i in 0..3 {
                    for j in 0..3 {
                        let v = -0.5 * inv * cross[i][j];
                        trip.push((dofs[0][i], dofs[1][j], v));
                        trip.push((dofs[1][j], dofs[0][i], v));
                    }
                }
            }
        }
        for k in 0..2 {
            let u = layout.velocity_dof(k, t);
            for i in 0..3 {
                let b = el.divergence(i) * el.area;
                trip.push((u, dofs[k][i], b));
                trip.push((dofs[k][i], u, b));
            }
        }
        for r in 0..2 {
            for i in 0..3 {
                trip.push((layout.multiplier, dofs[r][i], mean[r][i]));
                trip.push((dofs[r][i], layout.multiplier, mean[r][i]));
            }
        }
    }
    let k = CsrMatrix::from_triplets(layout.dim, &trip)?;
    let d_trip: Vec<(usize, usize, f64)> = m
        .iter()
        .enumerate()
        .map(|(i, &v)| (layout.velocity + i, layout.velocity + i, -v))
        .collect();
    let d = CsrMatrix::from_triplets(layout.dim, &d_trip)?;
    let mut kernel = vec![0.0; layout.dim];
    for e in 0..mesh.n_edges() {
        let n = mesh.edge_normal(e);
        kernel[dofmap.sigma_dof(0, e)] = n[0];
        kernel[dofmap.sigma_dof(1, e)] = n[1];
    }
    if let Some(p) = layout.pressure {
        kernel[p..p + nt].fill(-1.0);
    }
    Ok(AssembledSystem { k, d, m, layout, mu, kernel })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_domain, Domain};

    fn square(n0: usize) -> (Mesh, DofMap) {
        let m = generate_domain(Domain::Square, n0).unwrap();
        let d = DofMap::new(&m);
        (m, d)
    }

    #[test]
    fn sizes_and_symmetry() {
        let (m, d) = square(2);
        let full = assemble_full(&m, &d, 0.5).unwrap();
        let red = assemble_reduced(&m, &d, 0.5).unwrap();
        assert_eq!(full.k.dim(), d.n_total());
        assert_eq!(red.k.dim(), d.n_sigma() + d.n_velocity() + 1);
        assert_eq!(full.k.max_asymmetry(), 0.0);
        assert_eq!(red.k.max_asymmetry(), 0.0);
    }

    #[test]
    fn divergence_entries() {
        let (m, d) = square(1);
        let sys = assemble_full(&m, &d, 0.5).unwrap();
        for t in 0..m.n_triangles() {
            let el = Rt0Element::new(&m, t);
            for k in 0..2 {
                let u = sys.layout.velocity_dof(k, t);
                for (i, dof) in d.local_sigma_dofs(t, k).into_iter().enumerate() {
                    let expect = el.signs[i] * el.lengths[i];
                    assert!((sys.k.get(u, dof) - expect).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn velocity_mass() {
        let (m, d) = square(1);
        assert_eq!(assemble_velocity_mass(&m, &d).unwrap(), vec![0.5; 4]);
        let r = m.uniform_refine();
        let mr = assemble_velocity_mass(&r, &DofMap::new(&r)).unwrap();
        assert!(mr.iter().all(|&v| (v - 0.125).abs() < 1e-15));
        let (m, d) = square(3);
        let trace: f64 = assemble_velocity_mass(&m, &d).unwrap().iter().sum();
        assert!((trace - 2.0).abs() < 1e-13);
    }

    #[test]
    fn reduced_and_full_share_b_and_mass() {
        let (m, d) = square(2);
        let full = assemble_full(&m, &d, 0.5).unwrap();
        let red = assemble_reduced(&m, &d, 0.5).unwrap();
        assert_eq!(full.m, red.m);
        for k in 0..2 {
            for t in 0..m.n_triangles() {
                for dof in d.local_sigma_dofs(t, k) {
                    assert_eq!(
                        full.k.get(full.layout.velocity_dof(k, t), dof),
                        red.k.get(red.layout.velocity_dof(k, t), dof)
                    );
                }
            }
        }
    }

    #[test]
    fn viscosity_scaling() {
        let (m, d) = square(2);
        let a = assemble_full(&m, &d, 0.5).unwrap();
        let b = assemble_full(&m, &d, 1.5).unwrap();
        let ns = d.n_sigma() + d.n_pressure();
        for i in 0..a.k.dim() {
            for (j, v) in a.k.row(i) {
                let w = b.k.get(i, j);
                if i < ns && j < ns {
                    assert!((w - v / 3.0).abs() <= 1e-15 * v.abs().max(1.0));
                } else {
                    assert_eq!(w, v);
                }
            }
        }
    }

    #[test]
    fn deviatoric_diagonal_is_nonnegative() {
        let (m, d) = square(2);
        let red = assemble_reduced(&m, &d, 0.5).unwrap();
        for i in 0..d.n_sigma() {
            assert!(red.k.get(i, i) > 0.0);
        }
    }

    #[test]
    fn kernel_is_null_without_multiplier() {
        let m = generate_domain(Domain::LShape, 2).unwrap();
        let d = DofMap::new(&m);
        for sys in [assemble_full(&m, &d, 0.5).unwrap(), assemble_reduced(&m, &d, 0.5).unwrap()] {
            let kz = sys.k.matvec(&sys.kernel);
            let mult = sys.layout.multiplier;
            for (i, v) in kz.iter().enumerate() {
                if i != mult {
                    assert!(v.abs() < 1e-13, "row {i}: {v}");
                }
            }
            // ∫ tr I = 2|Ω|.
            assert!((kz[mult] - 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gauged_solve_satisfies_original_pencil() {
        let (m, d) = square(3);
        for sys in [assemble_full(&m, &d, 0.5).unwrap(), assemble_reduced(&m, &d, 0.5).unwrap()] {
            let pairs = sys.eigensolve(&EigenOptions { nev: 2, ..Default::default() }).unwrap();
            for p in &pairs {
                assert!(p.residual < 1e-9, "{}", p.residual);
                let norm: f64 = sys.m.iter().enumerate().map(|(i, mi)| mi * p.vector[sys.layout.velocity + i].powi(2)).sum();
                assert!((norm - 1.0).abs() < 1e-12);
                let trace: f64 = sys.k.row(sys.layout.multiplier).map(|(j, v)| v * p.vector[j]).sum();
                assert!(trace.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        let (m, d) = square(1);
        assert_eq!(assemble_full(&m, &d, 0.0).unwrap_err(), AssemblyError::BadViscosity(0.0));
        let (m2, _) = square(2);
        assert_eq!(assemble_full(&m2, &d, 0.5).unwrap_err(), AssemblyError::DofMapMismatch);
    }
}
