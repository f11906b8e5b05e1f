//! Velocity postprocessing and the residual indicators `θ_T` and `η_T`.

use thiserror::Error;

use crate::assembly::{BlockLayout, Scheme};
use crate::fe::{gauss_legendre_unit, quadrature_rule, Rt0Element};
use crate::linalg::EigenPair;
use crate::mesh::{GeometryTables, Mesh, Point};

#[derive(Debug, Error, PartialEq)]
pub enum EstimatorError {
    #[error("solution has {found} {what} values, mesh needs {expected}")]
    SizeMismatch { what: &'static str, expected: usize, found: usize },
    #[error("η needs a pressure; the solution comes from the reduced scheme")]
    MissingPressure,
    #[error("eigenvector length {found} does not match the layout ({expected})")]
    LayoutMismatch { expected: usize, found: usize },
}

/// One discrete eigenpair split into its fields.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralSolution {
    pub lambda: f64,
    /// Flux coefficients, row-major as in [`crate::fe::DofMap`].
    pub sigma: Vec<f64>,
    /// Per-triangle pressure; `None` for the reduced scheme.
    pub pressure: Option<Vec<f64>>,
    pub velocity: Vec<[f64; 2]>,
    pub mu: f64,
    pub scheme: Scheme,
}

impl SpectralSolution {
    pub fn from_eigenpair(pair: &EigenPair, layout: &BlockLayout, mu: f64) -> Result<Self, EstimatorError> {
        let x = &pair.vector;
        if x.len() != layout.dim {
            return Err(EstimatorError::LayoutMismatch { expected: layout.dim, found: x.len() });
        }
        let nt = layout.n_triangles;
        let velocity = (0..nt)
            .map(|t| [x[layout.velocity_dof(0, t)], x[layout.velocity_dof(1, t)]])
            .collect();
        Ok(Self {
            lambda: pair.lambda,
            sigma: x[..layout.n_sigma].to_vec(),
            pressure: layout.pressure.map(|p| x[p..p + nt].to_vec()),
            velocity,
            mu,
            scheme: layout.scheme(),
        })
    }

    /// `‖u_h‖₀`.
    pub fn velocity_norm(&self, mesh: &Mesh) -> f64 {
        self.velocity
            .iter()
            .enumerate()
            .map(|(t, u)| mesh.area(t) * (u[0] * u[0] + u[1] * u[1]))
            .sum::<f64>()
            .sqrt()
    }

    /// `∫_Ω tr(σ_h)`.
    pub fn trace_integral(&self, mesh: &Mesh) -> f64 {
        (0..mesh.n_triangles())
            .map(|t| {
                let rows = self.affine_rows(mesh, t);
                let c = mesh.centroid(t);
                mesh.area(t) * (rows[0].0[0] + rows[0].1 * c[0] + rows[1].0[1] + rows[1].1 * c[1])
            })
            .sum()
    }

    /// Multiplies every field by `c`; `λ` is unchanged.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            sigma: self.sigma.iter().map(|v| c * v).collect(),
            pressure: self.pressure.as_ref().map(|p| p.iter().map(|v| c * v).collect()),
            velocity: self.velocity.iter().map(|u| [c * u[0], c * u[1]]).collect(),
            ..self.clone()
        }
    }

    /// Row `r` of `σ_h` on `t` as `a + b·x`.
    pub fn affine_rows(&self, mesh: &Mesh, t: usize) -> [([f64; 2], f64); 2] {
        let el = Rt0Element::new(mesh, t);
        let edges = mesh.triangle_edges(t);
        let ne = mesh.n_edges();
        [0, 1].map(|r| el.affine(edges.map(|e| self.sigma[r * ne + e])))
    }

    fn check(&self, mesh: &Mesh) -> Result<(), EstimatorError> {
        let sizes = [
            ("flux", 2 * mesh.n_edges(), self.sigma.len()),
            ("velocity", mesh.n_triangles(), self.velocity.len()),
            ("pressure", mesh.n_triangles(), self.pressure.as_ref().map_or(mesh.n_triangles(), Vec::len)),
        ];
        for (what, expected, found) in sizes {
            if expected != found {
                return Err(EstimatorError::SizeMismatch { what, expected, found });
            }
        }
        Ok(())
    }
}

/// Continuous piecewise-linear lift `Θ_h u_h` given by its vertex values.
#[derive(Clone, Debug, PartialEq)]
pub struct PostprocessedVelocity {
    pub vertex_values: Vec<[f64; 2]>,
}

impl PostprocessedVelocity {
    pub fn eval(&self, mesh: &Mesh, t: usize, x: Point) -> [f64; 2] {
        let el = Rt0Element::new(mesh, t);
        let l = el.barycentric(x);
        let tri = mesh.triangles()[t];
        let mut v = [0.0; 2];
        for i in 0..3 {
            for c in 0..2 {
                v[c] += l[i] * self.vertex_values[tri[i]][c];
            }
        }
        v
    }

    /// `‖Θ_h u_h − f‖₀` with the degree-6 rule.
    pub fn l2_error<F: Fn(Point) -> [f64; 2]>(&self, mesh: &Mesh, f: F) -> f64 {
        let rule = quadrature_rule(6).expect("degree 6 is supported");
        let mut s = 0.0;
        for t in 0..mesh.n_triangles() {
            for (x, w) in rule.on_triangle(&mesh.triangle_points(t)) {
                let v = self.eval(mesh, t, x);
                let g = f(x);
                s += w * ((v[0] - g[0]).powi(2) + (v[1] - g[1]).powi(2));
            }
        }
        s.sqrt()
    }
}

/// Vertex values `Σ_{T∋z} |T| u_T / |ω_z|`.
pub fn postprocess_velocity(mesh: &Mesh, geometry: &GeometryTables, u: &[[f64; 2]]) -> PostprocessedVelocity {
    let vertex_values = (0..mesh.n_vertices())
        .map(|z| {
            let mut s = [0.0; 2];
            for &t in &geometry.patches[z] {
                s[0] += geometry.area[t] * u[t][0];
                s[1] += geometry.area[t] * u[t][1];
            }
            let a = geometry.patch_area[z];
            [s[0] / a, s[1] / a]
        })
        .collect();
    PostprocessedVelocity { vertex_values }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IndicatorKind {
    Theta,
    Eta,
}

/// Squared local indicators with a per-element breakdown.
#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorField {
    pub kind: IndicatorKind,
    /// `θ_T²` or `η_T²`.
    pub local: Vec<f64>,
    /// Element-interior terms.
    pub volume: Vec<f64>,
    /// Interior-edge jump terms.
    pub jump: Vec<f64>,
    /// Boundary-edge terms.
    pub boundary: Vec<f64>,
}

impl IndicatorField {
    pub fn global_sq(&self) -> f64 {
        self.local.iter().sum()
    }

    pub fn global(&self) -> f64 {
        self.global_sq().sqrt()
    }

    /// Unsquared local values `β_T`.
    pub fn beta(&self) -> Vec<f64> {
        self.local.iter().map(|v| v.sqrt()).collect()
    }

    fn new(kind: IndicatorKind, nt: usize) -> Self {
        Self {
            kind,
            local: vec![0.0; nt],
            volume: vec![0.0; nt],
            jump: vec![0.0; nt],
            boundary: vec![0.0; nt],
        }
    }

    fn finish(mut self) -> Self {
        for t in 0..self.local.len() {
            self.local[t] = self.volume[t] + self.jump[t] + self.boundary[t];
        }
        self
    }
}

/// Per-element data needed by the indicators.
struct ElementData {
    rows: [([f64; 2], f64); 2],
    p: f64,
}

impl ElementData {
    fn sigma(&self, x: Point) -> [[f64; 2]; 2] {
        self.rows.map(|(a, b)| [a[0] + b * x[0], a[1] + b * x[1]])
    }

    fn deviatoric(&self, x: Point) -> [[f64; 2]; 2] {
        let s = self.sigma(x);
        let h = 0.5 * (s[0][0] + s[1][1]);
        [[s[0][0] - h, s[0][1]], [s[1][0], s[1][1] - h]]
    }

    /// `p_h + tr(σ_h)/2`.
    fn q(&self, x: Point) -> f64 {
        let s = self.sigma(x);
        self.p + 0.5 * (s[0][0] + s[1][1])
    }
}

fn element_data(mesh: &Mesh, sol: &SpectralSolution) -> Vec<ElementData> {
    (0..mesh.n_triangles())
        .map(|t| ElementData {
            rows: sol.affine_rows(mesh, t),
            p: sol.pressure.as_ref().map_or(0.0, |p| p[t]),
        })
        .collect()
}

/// Adds `h_e ∫_e |g_T − g_T'|²` (interior) or `h_e ∫_e |g_T|²` (boundary) to every
/// element containing `e`, evaluating each edge once.
fn edge_terms<G>(mesh: &Mesh, geometry: &GeometryTables, field: &mut IndicatorField, g: G)
where
    G: Fn(usize, usize, Point) -> [f64; 2],
{
    let (xs, ws) = gauss_legendre_unit(2);
    for (e, &[a, b]) in mesh.edges().iter().enumerate() {
        let (p, q) = (mesh.vertices()[a], mesh.vertices()[b]);
        let len = geometry.edge_length[e];
        let (t0, t1) = mesh.edge_triangles(e);
        let mut s = 0.0;
        for (&xi, &w) in xs.iter().zip(ws) {
            let x = [p[0] + xi * (q[0] - p[0]), p[1] + xi * (q[1] - p[1])];
            let v0 = g(t0, e, x);
            let d = match t1 {
                Some(t1) => {
                    let v1 = g(t1, e, x);
                    [v0[0] - v1[0], v0[1] - v1[1]]
                }
                None => v0,
            };
            s += w * (d[0] * d[0] + d[1] * d[1]);
        }
        let term = len * len * s;
        match t1 {
            Some(t1) => {
                field.jump[t0] += term;
                field.jump[t1] += term;
            }
            None => field.boundary[t0] += term,
        }
    }
}

/// Indicator of the pseudostress–velocity scheme.
pub fn compute_theta(
    mesh: &Mesh,
    geometry: &GeometryTables,
    sol: &SpectralSolution,
) -> Result<IndicatorField, EstimatorError> {
    sol.check(mesh)?;
    let data = element_data(mesh, sol);
    let mut field = IndicatorField::new(IndicatorKind::Theta, mesh.n_triangles());
    theta_terms(mesh, geometry, sol, &data, &mut field);
    Ok(field.finish())
}

/// Indicator of the pseudostress–pressure–velocity scheme: `θ_T²` plus the
/// residual of `p_h + tr(σ_h)/2`.
pub fn compute_eta(
    mesh: &Mesh,
    geometry: &GeometryTables,
    sol: &SpectralSolution,
) -> Result<IndicatorField, EstimatorError> {
    sol.check(mesh)?;
    if sol.pressure.is_none() {
        return Err(EstimatorError::MissingPressure);
    }
    let data = element_data(mesh, sol);
    let mut field = IndicatorField::new(IndicatorKind::Eta, mesh.n_triangles());
    theta_terms(mesh, geometry, sol, &data, &mut field);

    let rule = quadrature_rule(2).expect("degree 2 is supported");
    for (t, d) in data.iter().enumerate() {
        let mut l2 = 0.0;
        for (x, w) in rule.on_triangle(&mesh.triangle_points(t)) {
            l2 += w * d.q(x).powi(2);
        }
        // curl(qI) has rows −∂_y q and ∂_x q, with ∇q = (b₁, b₂)/2.
        let (b1, b2) = (d.rows[0].1, d.rows[1].1);
        let curl = 0.25 * (b1 * b1 + b2 * b2) * geometry.area[t];
        field.volume[t] += l2 + geometry.h_t[t].powi(2) * curl;
    }
    // (qI)·t_e = q t_e with |t_e| = 1; the second slot carries nothing.
    edge_terms(mesh, geometry, &mut field, |t, _, x| [data[t].q(x), 0.0]);
    Ok(field.finish())
}

fn theta_terms(
    mesh: &Mesh,
    geometry: &GeometryTables,
    sol: &SpectralSolution,
    data: &[ElementData],
    field: &mut IndicatorField,
) {
    let c = 1.0 / (2.0 * sol.mu);
    let lifted = postprocess_velocity(mesh, geometry, &sol.velocity);
    let rule = quadrature_rule(2).expect("degree 2 is supported");
    for (t, d) in data.iter().enumerate() {
        let h2 = geometry.h_t[t].powi(2);
        let u = sol.velocity[t];
        let mut lift = 0.0;
        let mut dev = 0.0;
        for (x, w) in rule.on_triangle(&mesh.triangle_points(t)) {
            let v = lifted.eval(mesh, t, x);
            lift += w * ((v[0] - u[0]).powi(2) + (v[1] - u[1]).powi(2));
            // ∇u_h vanishes for piecewise-constant velocity.
            let s = d.deviatoric(x);
            dev += w * c * c * (s[0][0].powi(2) + s[0][1].powi(2) + s[1][0].powi(2) + s[1][1].powi(2));
        }
        // Row curls of σᵈ are b₂/2 and −b₁/2.
        let (b1, b2) = (d.rows[0].1, d.rows[1].1);
        let curl = c * c * 0.25 * (b1 * b1 + b2 * b2) * geometry.area[t];
        field.volume[t] += lift + h2 * (curl + dev);
    }
    edge_terms(mesh, geometry, field, |t, e, x| {
        let tan = mesh.edge_tangent(e);
        let s = data[t].deviatoric(x);
        [
            c * (s[0][0] * tan[0] + s[0][1] * tan[1]),
            c * (s[1][0] * tan[0] + s[1][1] * tan[1]),
        ]
    });
}
