//! Brute-force oracles for the discrete operators.
//!
//! Nothing here reuses the production kernels beyond the mesh, the dof numbering
//! and the block layout. Local bases come from solving the 3×3 flux-duality
//! system, every integral uses the degree-6 rule (5-point Gauss on edges), and
//! the forms are evaluated from their tensor definitions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{assemble_full, assemble_reduced, AssemblyError, BlockLayout, Scheme};
use crate::estimators::{compute_eta, compute_theta, EstimatorError, IndicatorField, SpectralSolution};
use crate::fe::{gauss_legendre_unit, interpolate_rt0, quadrature_rule, DofMap};
use crate::mesh::{generate_domain, Domain, Mesh, Point};

type Tensor = [[f64; 2]; 2];

#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    pub name: String,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl OracleReport {
    fn new(name: impl Into<String>, max_error: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            max_error,
            tolerance,
            passed: max_error <= tolerance,
        }
    }
}

/// Field `a + b·x` as `(a₀, a₁, b)`.
type Affine = [f64; 3];

fn eval_affine(c: &Affine, x: Point) -> [f64; 2] {
    [c[0] + c[2] * x[0], c[1] + c[2] * x[1]]
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Mean flux `(1/|e|)∫_e v·n_e` of a vector field along the global edge normal.
fn mean_flux(mesh: &Mesh, e: usize, f: impl Fn(Point) -> [f64; 2]) -> f64 {
    let (xs, ws) = gauss_legendre_unit(5);
    let [a, b] = mesh.edges()[e];
    let (p, q) = (mesh.vertices()[a], mesh.vertices()[b]);
    let n = mesh.edge_normal(e);
    xs.iter()
        .zip(ws)
        .map(|(&s, &w)| {
            let v = f([p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])]);
            w * (v[0] * n[0] + v[1] * n[1])
        })
        .sum()
}

/// Local basis on `t` dual to the mean fluxes over its edges, by Cramer's rule.
pub fn oracle_basis(mesh: &Mesh, t: usize) -> [Affine; 3] {
    let edges = mesh.triangle_edges(t);
    let monomials: [Affine; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let mut m = [[0.0; 3]; 3];
    for (j, &e) in edges.iter().enumerate() {
        for (k, mono) in monomials.iter().enumerate() {
            m[j][k] = mean_flux(mesh, e, |x| eval_affine(mono, x));
        }
    }
    let d = det3(&m);
    let mut basis = [[0.0; 3]; 3];
    for i in 0..3 {
        for k in 0..3 {
            let mut mk = m;
            for j in 0..3 {
                mk[j][k] = if i == j { 1.0 } else { 0.0 };
            }
            basis[i][k] = det3(&mk) / d;
        }
    }
    basis
}

fn deviatoric(s: &Tensor) -> Tensor {
    let h = 0.5 * (s[0][0] + s[1][1]);
    [[s[0][0] - h, s[0][1]], [s[1][0], s[1][1] - h]]
}

fn frob(a: &Tensor, b: &Tensor) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

/// Dense `K` from the definitions of the forms.
pub fn oracle_matrix(mesh: &Mesh, scheme: Scheme, mu: f64) -> Vec<Vec<f64>> {
    let dofmap = DofMap::new(mesh);
    let layout = BlockLayout::new(&dofmap, scheme);
    let n = layout.dim;
    let mut k = vec![vec![0.0; n]; n];
    let rule = quadrature_rule(6).expect("degree 6 is supported");
    let inv = 1.0 / (2.0 * mu);
    for t in 0..mesh.n_triangles() {
        let basis = oracle_basis(mesh, t);
        let edges = mesh.triangle_edges(t);
        // Local unknowns: (global index, tensor field, pressure value); velocity separately.
        let mut local: Vec<(usize, Box<dyn Fn(Point) -> Tensor>, f64)> = Vec::new();
        for r in 0..2 {
            for i in 0..3 {
                let c = basis[i];
                local.push((
                    dofmap.sigma_dof(r, edges[i]),
                    Box::new(move |x| {
                        let v = eval_affine(&c, x);
                        let mut s = [[0.0; 2]; 2];
                        s[r] = v;
                        s
                    }),
                    0.0,
                ));
            }
        }
        if let Some(p) = layout.pressure {
            local.push((p + t, Box::new(|_| [[0.0; 2]; 2]), 1.0));
        }
        for (gi, fi, ri) in &local {
            for (gj, fj, rj) in &local {
                let mut a = 0.0;
                for (x, w) in rule.on_triangle(&mesh.triangle_points(t)) {
                    let (si, sj) = (fi(x), fj(x));
                    a += w * frob(&deviatoric(&si), &deviatoric(&sj));
                    if scheme == Scheme::Full {
                        let qi = ri + 0.5 * (si[0][0] + si[1][1]);
                        let qj = rj + 0.5 * (sj[0][0] + sj[1][1]);
                        a += w * 2.0 * qi * qj;
                    }
                }
                k[*gi][*gj] += inv * a;
            }
        }
        for (g, f, _) in local.iter().take(6) {
            // b(τ, v) = ∫ v·div τ, div of row r of a + b·x is 2b.
            let mut div = [0.0; 2];
            let mut tr = 0.0;
            let h = 1e-3;
            for (x, w) in rule.on_triangle(&mesh.triangle_points(t)) {
                let s = f(x);
                tr += w * (s[0][0] + s[1][1]);
                // Central differences are exact for affine fields.
                let sx = [f([x[0] + h, x[1]]), f([x[0] - h, x[1]])];
                let sy = [f([x[0], x[1] + h]), f([x[0], x[1] - h])];
                for r in 0..2 {
                    div[r] += w * ((sx[0][r][0] - sx[1][r][0]) + (sy[0][r][1] - sy[1][r][1])) / (2.0 * h);
                }
            }
            for (kk, d) in div.iter().enumerate() {
                let u = layout.velocity_dof(kk, t);
                k[u][*g] += d;
                k[*g][u] += d;
            }
            k[layout.multiplier][*g] += tr;
            k[*g][layout.multiplier] += tr;
        }
    }
    k
}

/// Compares the assembled `K` with [`oracle_matrix`] entrywise.
pub fn assembly_oracle(mesh: &Mesh, scheme: Scheme, mu: f64) -> Result<OracleReport, AssemblyError> {
    let dofmap = DofMap::new(mesh);
    let sys = match scheme {
        Scheme::Full => assemble_full(mesh, &dofmap, mu)?,
        Scheme::Reduced => assemble_reduced(mesh, &dofmap, mu)?,
    };
    let dense = sys.k.to_dense();
    let oracle = oracle_matrix(mesh, scheme, mu);
    let mut err: f64 = 0.0;
    for (a, b) in dense.iter().zip(&oracle) {
        for (x, y) in a.iter().zip(b) {
            err = err.max((x - y).abs());
        }
    }
    Ok(OracleReport::new(
        format!("assembly {scheme}, mu = {mu} ({} triangles)", mesh.n_triangles()),
        err,
        1e-12,
    ))
}

/// Random polynomial tensor field of total degree ≤ 5 and its row-wise divergence.
struct PolyField {
    /// `coef[r][c][(i, j)]` multiplies `x^i y^j`.
    coef: [[Vec<(usize, usize, f64)>; 2]; 2],
}

impl PolyField {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let mut make = || {
            let mut v = Vec::new();
            for i in 0..=5usize {
                for j in 0..=(5 - i) {
                    v.push((i, j, rng.gen_range(-1.0..1.0)));
                }
            }
            v
        };
        Self {
            coef: [[make(), make()], [make(), make()]],
        }
    }

    fn value(&self, x: Point) -> Tensor {
        let mut s = [[0.0; 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                s[r][c] = self.coef[r][c]
                    .iter()
                    .map(|&(i, j, a)| a * x[0].powi(i as i32) * x[1].powi(j as i32))
                    .sum();
            }
        }
        s
    }

    fn divergence(&self, x: Point) -> [f64; 2] {
        let d = |terms: &[(usize, usize, f64)], dir: usize| -> f64 {
            terms
                .iter()
                .map(|&(i, j, a)| match dir {
                    0 if i > 0 => a * i as f64 * x[0].powi(i as i32 - 1) * x[1].powi(j as i32),
                    1 if j > 0 => a * j as f64 * x[0].powi(i as i32) * x[1].powi(j as i32 - 1),
                    _ => 0.0,
                })
                .sum()
        };
        [0, 1].map(|r| d(&self.coef[r][0], 0) + d(&self.coef[r][1], 1))
    }
}

/// `div(Π_h f) = P_h(div f)` elementwise for `n_fields` random polynomial fields.
pub fn commuting_diagram_oracle(mesh: &Mesh, n_fields: usize, seed: u64) -> OracleReport {
    let dofmap = DofMap::new(mesh);
    let rule = quadrature_rule(6).expect("degree 6 is supported");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut err: f64 = 0.0;
    for _ in 0..n_fields {
        let f = PolyField::random(&mut rng);
        let coeffs = interpolate_rt0(mesh, &dofmap, |x| f.value(x));
        for t in 0..mesh.n_triangles() {
            let basis = oracle_basis(mesh, t);
            let edges = mesh.triangle_edges(t);
            let area = mesh.area(t);
            let mut mean = [0.0; 2];
            for (x, w) in rule.on_triangle(&mesh.triangle_points(t)) {
                let d = f.divergence(x);
                mean[0] += w * d[0] / area;
                mean[1] += w * d[1] / area;
            }
            for r in 0..2 {
                let div: f64 = (0..3).map(|i| coeffs[dofmap.sigma_dof(r, edges[i])] * 2.0 * basis[i][2]).sum();
                err = err.max((div - mean[r]).abs() / mean[r].abs().max(1.0));
            }
        }
    }
    OracleReport::new(format!("commuting diagram ({n_fields} fields)"), err, 1e-10)
}

/// Per-element terms of the indicators, recomputed from scratch.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleIndicators {
    pub volume: Vec<f64>,
    pub jump: Vec<f64>,
    pub boundary: Vec<f64>,
}

/// Affine scalar `c₀ + c₁x + c₂y`.
type Lin = [f64; 3];

fn element_tensor(mesh: &Mesh, sol: &SpectralSolution, t: usize) -> [[Lin; 2]; 2] {
    let basis = oracle_basis(mesh, t);
    let edges = mesh.triangle_edges(t);
    let ne = mesh.n_edges();
    let mut s = [[[0.0; 3]; 2]; 2];
    for r in 0..2 {
        for i in 0..3 {
            let c = sol.sigma[r * ne + edges[i]];
            let b = basis[i];
            s[r][0][0] += c * b[0];
            s[r][0][1] += c * b[2];
            s[r][1][0] += c * b[1];
            s[r][1][2] += c * b[2];
        }
    }
    s
}

fn lin(l: &Lin, x: Point) -> f64 {
    l[0] + l[1] * x[0] + l[2] * x[1]
}

fn lin_comb(a: &Lin, ca: f64, b: &Lin, cb: f64) -> Lin {
    [ca * a[0] + cb * b[0], ca * a[1] + cb * b[1], ca * a[2] + cb * b[2]]
}

pub fn oracle_indicators(mesh: &Mesh, sol: &SpectralSolution, with_pressure: bool) -> OracleIndicators {
    let nt = mesh.n_triangles();
    let c = 1.0 / (2.0 * sol.mu);
    let rule = quadrature_rule(6).expect("degree 6 is supported");
    let (gx, gw) = gauss_legendre_unit(5);

    // σᵈ/2μ and q = p + tr σ/2 as affine functions per element.
    let mut dev = Vec::with_capacity(nt);
    let mut q = Vec::with_capacity(nt);
    for t in 0..nt {
        let s = element_tensor(mesh, sol, t);
        let half_tr = lin_comb(&s[0][0], 0.5, &s[1][1], 0.5);
        let d = [
            [lin_comb(&lin_comb(&s[0][0], 1.0, &half_tr, -1.0), c, &s[0][0], 0.0), lin_comb(&s[0][1], c, &s[0][1], 0.0)],
            [lin_comb(&s[1][0], c, &s[1][0], 0.0), lin_comb(&lin_comb(&s[1][1], 1.0, &half_tr, -1.0), c, &s[1][1], 0.0)],
        ];
        dev.push(d);
        let p = sol.pressure.as_ref().map_or(0.0, |p| p[t]);
        q.push(lin_comb(&half_tr, 1.0, &[p, 0.0, 0.0], 1.0));
    }

    // Θ_h u_h by scanning every triangle for each vertex.
    let lifted: Vec<[f64; 2]> = (0..mesh.n_vertices())
        .map(|z| {
            let (mut s, mut a) = ([0.0; 2], 0.0);
            for t in 0..nt {
                if mesh.triangles()[t].contains(&z) {
                    let at = mesh.area(t);
                    s[0] += at * sol.velocity[t][0];
                    s[1] += at * sol.velocity[t][1];
                    a += at;
                }
            }
            [s[0] / a, s[1] / a]
        })
        .collect();

    let mut volume = vec![0.0; nt];
    for t in 0..nt {
        let pts = mesh.triangle_points(t);
        let tri = mesh.triangles()[t];
        let h = (0..3)
            .map(|i| {
                let (a, b) = (pts[i], pts[(i + 1) % 3]);
                (a[0] - b[0]).hypot(a[1] - b[1])
            })
            .fold(0.0, f64::max);
        let d = &dev[t];
        // Row curl ∂_x v₂ − ∂_y v₁ read off the affine coefficients.
        let curl = [d[0][1][1] - d[0][0][2], d[1][1][1] - d[1][0][2]];
        let qcurl = [-q[t][2], q[t][1]];
        let mut v = 0.0;
        for (x, w) in rule.on_triangle(&pts) {
            // Barycentric coordinates from the area formula.
            let area = |a: Point, b: Point, c: Point| 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
            let total = area(pts[0], pts[1], pts[2]);
            let l = [area(x, pts[1], pts[2]) / total, area(pts[0], x, pts[2]) / total, area(pts[0], pts[1], x) / total];
            let mut th = [0.0; 2];
            for i in 0..3 {
                th[0] += l[i] * lifted[tri[i]][0];
                th[1] += l[i] * lifted[tri[i]][1];
            }
            let u = sol.velocity[t];
            v += w * ((th[0] - u[0]).powi(2) + (th[1] - u[1]).powi(2));
            let grad_minus_dev: f64 = (0..2).flat_map(|r| (0..2).map(move |cc| (r, cc))).map(|(r, cc)| lin(&d[r][cc], x).powi(2)).sum();
            v += w * h * h * (curl[0].powi(2) + curl[1].powi(2) + grad_minus_dev);
            if with_pressure {
                v += w * (lin(&q[t], x).powi(2) + h * h * (qcurl[0].powi(2) + qcurl[1].powi(2)));
            }
        }
        volume[t] = v;
    }

    let mut jump = vec![0.0; nt];
    let mut boundary = vec![0.0; nt];
    for e in 0..mesh.n_edges() {
        let [a, b] = mesh.edges()[e];
        let (p0, p1) = (mesh.vertices()[a], mesh.vertices()[b]);
        let len = (p1[0] - p0[0]).hypot(p1[1] - p0[1]);
        let tan = [(p1[0] - p0[0]) / len, (p1[1] - p0[1]) / len];
        let (t0, t1) = mesh.edge_triangles(e);
        let trace = |t: usize, x: Point| -> [f64; 3] {
            let d = &dev[t];
            [
                lin(&d[0][0], x) * tan[0] + lin(&d[0][1], x) * tan[1],
                lin(&d[1][0], x) * tan[0] + lin(&d[1][1], x) * tan[1],
                if with_pressure { lin(&q[t], x) } else { 0.0 },
            ]
        };
        let mut s = 0.0;
        for (&xi, &w) in gx.iter().zip(gw) {
            let x = [p0[0] + xi * (p1[0] - p0[0]), p0[1] + xi * (p1[1] - p0[1])];
            let v0 = trace(t0, x);
            let v = match t1 {
                Some(t1) => {
                    let v1 = trace(t1, x);
                    [v0[0] - v1[0], v0[1] - v1[1], v0[2] - v1[2]]
                }
                None => v0,
            };
            s += w * len * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        }
        match t1 {
            Some(t1) => {
                jump[t0] += len * s;
                jump[t1] += len * s;
            }
            None => boundary[t0] += len * s,
        }
    }
    OracleIndicators { volume, jump, boundary }
}

fn random_solution(mesh: &Mesh, rng: &mut ChaCha8Rng, scheme: Scheme) -> SpectralSolution {
    let nt = mesh.n_triangles();
    SpectralSolution {
        lambda: 1.0,
        sigma: (0..2 * mesh.n_edges()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        pressure: (scheme == Scheme::Full).then(|| (0..nt).map(|_| rng.gen_range(-1.0..1.0)).collect()),
        velocity: (0..nt).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect(),
        mu: rng.gen_range(0.2..2.0),
        scheme,
    }
}

fn field_error(field: &IndicatorField, oracle: &OracleIndicators) -> f64 {
    let mut err: f64 = 0.0;
    for t in 0..field.local.len() {
        for (a, b) in [
            (field.volume[t], oracle.volume[t]),
            (field.jump[t], oracle.jump[t]),
            (field.boundary[t], oracle.boundary[t]),
        ] {
            err = err.max((a - b).abs() / b.abs().max(1.0));
        }
    }
    err
}

/// Indicator terms for `trials` random coefficient vectors against [`oracle_indicators`].
pub fn estimator_oracle(mesh: &Mesh, trials: usize, seed: u64) -> Result<OracleReport, EstimatorError> {
    let geometry = mesh.geometry().expect("oracle meshes are valid");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut err: f64 = 0.0;
    for _ in 0..trials {
        let sol = random_solution(mesh, &mut rng, Scheme::Full);
        err = err.max(field_error(&compute_theta(mesh, &geometry, &sol)?, &oracle_indicators(mesh, &sol, false)));
        err = err.max(field_error(&compute_eta(mesh, &geometry, &sol)?, &oracle_indicators(mesh, &sol, true)));
    }
    Ok(OracleReport::new(
        format!("estimator terms ({} triangles, {trials} trials)", mesh.n_triangles()),
        err,
        1e-12,
    ))
}

/// Small meshes with at most 8 triangles, including a bisected one.
pub fn oracle_meshes() -> Vec<Mesh> {
    let square = generate_domain(Domain::Square, 1).expect("valid");
    let bisected = square.bisect_marked(&[0]).expect("valid").bisect_marked(&[1]).expect("valid");
    let skewed = Mesh::from_parts(
        vec![[0.0, 0.0], [1.3, 0.1], [0.2, 0.9], [1.1, 1.2], [-0.4, 0.7]],
        vec![[0, 1, 2], [1, 3, 2], [0, 2, 4]],
    )
    .expect("valid");
    vec![square.clone(), square.uniform_refine(), bisected, skewed]
}

/// The oracle suites run by `selftest`.
pub fn run_all() -> Vec<OracleReport> {
    let mut out = Vec::new();
    for mesh in oracle_meshes() {
        for (scheme, mu) in [(Scheme::Full, 0.5), (Scheme::Reduced, 0.5), (Scheme::Full, 1.7)] {
            match assembly_oracle(&mesh, scheme, mu) {
                Ok(r) => out.push(r),
                Err(e) => out.push(OracleReport {
                    name: format!("assembly {scheme}: {e}"),
                    max_error: f64::INFINITY,
                    tolerance: 1e-12,
                    passed: false,
                }),
            }
        }
        match estimator_oracle(&mesh, 5, 11) {
            Ok(r) => out.push(r),
            Err(e) => out.push(OracleReport {
                name: format!("estimator terms: {e}"),
                max_error: f64::INFINITY,
                tolerance: 1e-12,
                passed: false,
            }),
        }
    }
    let mesh = generate_domain(Domain::LShape, 2).expect("valid");
    out.push(commuting_diagram_oracle(&mesh, 20, 3));
    out
}
