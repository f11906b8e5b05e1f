//! Lowest-order Raviart–Thomas elements for tensor rows, piecewise constants,
//! quadrature and degree-of-freedom numbering.

mod quadrature;

pub use quadrature::{gauss_legendre_unit, quadrature_rule, QuadratureRule};

use thiserror::Error;

use crate::mesh::{Mesh, Point};

#[derive(Debug, Error, PartialEq)]
pub enum FeError {
    #[error("no triangle quadrature rule of degree {0} (supported: 1 to 6)")]
    UnsupportedDegree(usize),
    #[error("point ({x}, {y}) lies outside triangle {tri}")]
    PointOutside { tri: usize, x: f64, y: f64 },
}

/// Global numbering of the discrete unknowns.
///
/// Flux dofs are mean normal fluxes `(1/|e|)∫_e τ_r·n_e` of each tensor row `r`,
/// numbered `r·n_edges + e`. Pressure has one dof per triangle, velocity two,
/// and one scalar multiplier enforces `∫_Ω tr(σ_h) = 0`.
#[derive(Clone, Debug)]
pub struct DofMap {
    n_edges: usize,
    n_triangles: usize,
    tri_edges: Vec<[usize; 3]>,
    signs: Vec<[f64; 3]>,
}

impl DofMap {
    pub fn new(mesh: &Mesh) -> Self {
        let nt = mesh.n_triangles();
        let tri_edges = (0..nt).map(|t| mesh.triangle_edges(t)).collect();
        let signs = (0..nt)
            .map(|t| [mesh.edge_sign(t, 0), mesh.edge_sign(t, 1), mesh.edge_sign(t, 2)])
            .collect();
        Self {
            n_edges: mesh.n_edges(),
            n_triangles: nt,
            tri_edges,
            signs,
        }
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn n_triangles(&self) -> usize {
        self.n_triangles
    }

    pub fn n_sigma(&self) -> usize {
        2 * self.n_edges
    }

    pub fn n_pressure(&self) -> usize {
        self.n_triangles
    }

    pub fn n_velocity(&self) -> usize {
        2 * self.n_triangles
    }

    /// Size of the pseudostress–pressure–velocity system including the multiplier.
    pub fn n_total(&self) -> usize {
        self.n_sigma() + self.n_pressure() + self.n_velocity() + 1
    }

    pub fn sigma_dof(&self, row: usize, edge: usize) -> usize {
        row * self.n_edges + edge
    }

    /// Flux dofs of row `row` on triangle `t`, in local edge order.
    pub fn local_sigma_dofs(&self, t: usize, row: usize) -> [usize; 3] {
        self.tri_edges[t].map(|e| self.sigma_dof(row, e))
    }

    pub fn signs(&self, t: usize) -> [f64; 3] {
        self.signs[t]
    }

    /// Checks the dofmap was built for this mesh.
    pub fn matches(&self, mesh: &Mesh) -> bool {
        self.n_edges == mesh.n_edges()
            && self.n_triangles == mesh.n_triangles()
            && (0..self.n_triangles).all(|t| self.tri_edges[t] == mesh.triangle_edges(t))
    }
}

/// The local RT₀ basis on one triangle in physical coordinates:
/// `φ_i(x) = s_i |e_i| / (2|T|) (x − p_i)`, `p_i` the vertex opposite edge `i`.
#[derive(Clone, Copy, Debug)]
pub struct Rt0Element {
    pub points: [Point; 3],
    pub area: f64,
    pub lengths: [f64; 3],
    pub signs: [f64; 3],
}

impl Rt0Element {
    pub fn new(mesh: &Mesh, t: usize) -> Self {
        let edges = mesh.triangle_edges(t);
        Self {
            points: mesh.triangle_points(t),
            area: mesh.area(t),
            lengths: edges.map(|e| mesh.edge_length(e)),
            signs: [mesh.edge_sign(t, 0), mesh.edge_sign(t, 1), mesh.edge_sign(t, 2)],
        }
    }

    fn scale(&self, i: usize) -> f64 {
        self.signs[i] * self.lengths[i] / (2.0 * self.area)
    }

    pub fn value(&self, i: usize, x: Point) -> [f64; 2] {
        let s = self.scale(i);
        let p = self.points[i];
        [s * (x[0] - p[0]), s * (x[1] - p[1])]
    }

    pub fn divergence(&self, i: usize) -> f64 {
        self.signs[i] * self.lengths[i] / self.area
    }

    /// Writes `Σ c_i φ_i` as `a + b·x`.
    pub fn affine(&self, coeffs: [f64; 3]) -> ([f64; 2], f64) {
        let mut a = [0.0; 2];
        let mut b = 0.0;
        for i in 0..3 {
            let s = coeffs[i] * self.scale(i);
            b += s;
            a[0] -= s * self.points[i][0];
            a[1] -= s * self.points[i][1];
        }
        (a, b)
    }

    pub fn barycentric(&self, x: Point) -> [f64; 3] {
        let [p0, p1, p2] = self.points;
        let d = 2.0 * self.area;
        let (dx, dy) = (x[0] - p0[0], x[1] - p0[1]);
        let l1 = (dx * (p2[1] - p0[1]) - dy * (p2[0] - p0[0])) / d;
        let l2 = ((p1[0] - p0[0]) * dy - (p1[1] - p0[1]) * dx) / d;
        [1.0 - l1 - l2, l1, l2]
    }
}

/// Values and divergences of the three local basis functions at `x ∈ T`.
pub fn rt0_eval(mesh: &Mesh, t: usize, x: Point) -> Result<[([f64; 2], f64); 3], FeError> {
    let el = Rt0Element::new(mesh, t);
    if el.barycentric(x).iter().any(|&l| l < -1e-12) {
        return Err(FeError::PointOutside { tri: t, x: x[0], y: x[1] });
    }
    Ok([0, 1, 2].map(|i| (el.value(i, x), el.divergence(i))))
}

/// RT₀ interpolant of a tensor field: each dof is the mean row-wise normal flux
/// over the edge, computed with 5-point Gauss–Legendre.
pub fn interpolate_rt0<F>(mesh: &Mesh, dofmap: &DofMap, f: F) -> Vec<f64>
where
    F: Fn(Point) -> [[f64; 2]; 2],
{
    let (xs, ws) = gauss_legendre_unit(5);
    let mut coeffs = vec![0.0; dofmap.n_sigma()];
    for (e, &[a, b]) in mesh.edges().iter().enumerate() {
        let (p, q) = (mesh.vertices()[a], mesh.vertices()[b]);
        let n = mesh.edge_normal(e);
        for (&s, &w) in xs.iter().zip(ws) {
            let x = [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])];
            let v = f(x);
            for r in 0..2 {
                coeffs[dofmap.sigma_dof(r, e)] += w * (v[r][0] * n[0] + v[r][1] * n[1]);
            }
        }
    }
    coeffs
}

/// Element means `(1/|T|)∫_T g` with the degree-4 rule.
pub fn project_p0<G>(mesh: &Mesh, g: G) -> Vec<[f64; 2]>
where
    G: Fn(Point) -> [f64; 2],
{
    let rule = quadrature_rule(4).expect("degree 4 is supported");
    (0..mesh.n_triangles())
        .map(|t| {
            let mut s = [0.0; 2];
            for (x, w) in rule.on_triangle(&mesh.triangle_points(t)) {
                let v = g(x);
                s[0] += w * v[0];
                s[1] += w * v[1];
            }
            let area = mesh.area(t);
            [s[0] / area, s[1] / area]
        })
        .collect()
}
