//! Python bindings: meshes, eigen solves, indicators and campaigns.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use stokes_afem::adaptivity::{self, ConvergenceTable};
use stokes_afem::assembly::{assemble_full, assemble_reduced, Scheme};
use stokes_afem::estimators::{self, SpectralSolution};
use stokes_afem::fe::DofMap;
use stokes_afem::io::{self, ConfigOverrides};
use stokes_afem::linalg::EigenOptions;
use stokes_afem::mesh::{self, Domain};
use stokes_afem::verify;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

#[pyclass(name = "Mesh", frozen)]
#[derive(Clone)]
struct PyMesh {
    inner: mesh::Mesh,
}

#[pymethods]
impl PyMesh {
    #[new]
    fn new(vertices: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>) -> PyResult<Self> {
        let inner = mesh::Mesh::from_parts(vertices, triangles).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n_vertices(&self) -> usize {
        self.inner.n_vertices()
    }

    #[getter]
    fn n_triangles(&self) -> usize {
        self.inner.n_triangles()
    }

    #[getter]
    fn n_edges(&self) -> usize {
        self.inner.n_edges()
    }

    #[getter]
    fn vertices(&self) -> Vec<[f64; 2]> {
        self.inner.vertices().to_vec()
    }

    #[getter]
    fn triangles(&self) -> Vec<[usize; 3]> {
        self.inner.triangles().to_vec()
    }

    fn total_area(&self) -> f64 {
        self.inner.total_area()
    }

    fn is_conforming(&self) -> bool {
        self.inner.check_conformity().is_ok()
    }

    fn uniform_refine(&self) -> Self {
        Self {
            inner: self.inner.uniform_refine(),
        }
    }

    fn bisect(&self, marked: Vec<usize>) -> PyResult<Self> {
        let inner = self.inner.bisect_marked(&marked).map_err(value_err)?;
        Ok(Self { inner })
    }

    /// Gmsh MSH 2.2 ASCII text.
    fn to_msh(&self) -> String {
        io::msh_string(&self.inner)
    }

    #[staticmethod]
    fn from_msh(text: &str) -> PyResult<Self> {
        let inner = io::parse_msh(text).map_err(value_err)?.mesh;
        Ok(Self { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "Mesh(n_vertices={}, n_triangles={})",
            self.inner.n_vertices(),
            self.inner.n_triangles()
        )
    }
}

/// Lowest eigenpair of one discrete problem, `‖u_h‖ = 1`.
#[pyclass(name = "Solution", frozen)]
struct PySolution {
    inner: SpectralSolution,
    lambdas: Vec<f64>,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn eigenvalue(&self) -> f64 {
        self.inner.lambda
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.lambdas.clone()
    }

    #[getter]
    fn velocity(&self) -> Vec<[f64; 2]> {
        self.inner.velocity.clone()
    }

    #[getter]
    fn pressure(&self) -> Option<Vec<f64>> {
        self.inner.pressure.clone()
    }

    #[getter]
    fn sigma(&self) -> Vec<f64> {
        self.inner.sigma.clone()
    }

    #[getter]
    fn scheme(&self) -> String {
        self.inner.scheme.to_string()
    }
}

#[pyfunction]
fn generate_domain(name: &str, n0: usize) -> PyResult<PyMesh> {
    let domain: Domain = name.parse().map_err(value_err)?;
    let inner = mesh::generate_domain(domain, n0).map_err(value_err)?;
    Ok(PyMesh { inner })
}

#[pyfunction]
#[pyo3(signature = (mesh, scheme = "full", mu = 0.5, shift = 0.0, nev = 1))]
fn solve(py: Python<'_>, mesh: &PyMesh, scheme: &str, mu: f64, shift: f64, nev: usize) -> PyResult<PySolution> {
    let scheme: Scheme = scheme.parse().map_err(value_err)?;
    let m = &mesh.inner;
    py.detach(|| {
        let dofmap = DofMap::new(m);
        let sys = match scheme {
            Scheme::Full => assemble_full(m, &dofmap, mu),
            Scheme::Reduced => assemble_reduced(m, &dofmap, mu),
        }
        .map_err(value_err)?;
        let pairs = sys
            .eigensolve(&EigenOptions {
                shift,
                nev,
                ..Default::default()
            })
            .map_err(runtime_err)?;
        let inner = SpectralSolution::from_eigenpair(&pairs[0], &sys.layout, mu).map_err(runtime_err)?;
        Ok(PySolution {
            inner,
            lambdas: pairs.iter().map(|p| p.lambda).collect(),
        })
    })
}

/// Squared local indicators, `kind` is `"eta"` or `"theta"`.
#[pyfunction]
#[pyo3(signature = (mesh, solution, kind = "eta"))]
fn indicators(mesh: &PyMesh, solution: &PySolution, kind: &str) -> PyResult<Vec<f64>> {
    let geometry = mesh.inner.geometry().map_err(value_err)?;
    let field = match kind {
        "eta" => estimators::compute_eta(&mesh.inner, &geometry, &solution.inner),
        "theta" => estimators::compute_theta(&mesh.inner, &geometry, &solution.inner),
        _ => return Err(PyValueError::new_err(format!("unknown indicator `{kind}`"))),
    }
    .map_err(value_err)?;
    Ok(field.local)
}

#[pyfunction]
#[pyo3(signature = (mesh, indicators_sq, fraction = 0.5))]
fn mark(mesh: &PyMesh, indicators_sq: Vec<f64>, fraction: f64) -> PyResult<Vec<usize>> {
    if indicators_sq.len() != mesh.inner.n_triangles() {
        return Err(PyValueError::new_err("one indicator per triangle expected"));
    }
    let beta: Vec<f64> = indicators_sq.iter().map(|v| v.max(0.0).sqrt()).collect();
    let max = beta.iter().copied().fold(0.0, f64::max);
    if !(fraction > 0.0 && fraction <= 1.0) || max <= 0.0 {
        return Err(PyValueError::new_err("need fraction in (0, 1] and a nonzero indicator"));
    }
    Ok((0..beta.len()).filter(|&t| beta[t] >= fraction * max).collect())
}

fn table_rows<'py>(py: Python<'py>, table: &ConvergenceTable) -> PyResult<Vec<Bound<'py, PyDict>>> {
    table
        .records
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("iter", r.iter)?;
            d.set_item("N", r.n_dofs)?;
            d.set_item("lambda_h1", r.lambda_h1)?;
            d.set_item("lambdas", r.lambdas.clone())?;
            d.set_item("err", r.err)?;
            d.set_item("estimator_sq", r.estimator_sq)?;
            d.set_item("effectivity", r.effectivity)?;
            d.set_item("elements", r.elements)?;
            d.set_item("seconds", r.seconds)?;
            Ok(d)
        })
        .collect()
}

/// Runs a campaign from a JSON config string and returns one dict per iteration.
#[pyfunction]
#[pyo3(signature = (config_json = "{}"))]
fn run_campaign<'py>(py: Python<'py>, config_json: &str) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let config = io::parse_config_str(config_json, &ConfigOverrides::default()).map_err(value_err)?;
    let table = py.detach(|| adaptivity::run_campaign(&config)).map_err(runtime_err)?;
    table_rows(py, &table)
}

#[pyfunction]
#[pyo3(signature = (domain, mu = 0.5))]
fn reference_eigenvalue(domain: &str, mu: f64) -> PyResult<f64> {
    let domain: Domain = domain.parse().map_err(value_err)?;
    Ok(adaptivity::reference_eigenvalue(domain, mu))
}

/// Oracle suites as `(name, max_error, tolerance, passed)` tuples.
#[pyfunction]
fn selftest() -> Vec<(String, f64, f64, bool)> {
    verify::run_all()
        .into_iter()
        .map(|r| (r.name, r.max_error, r.tolerance, r.passed))
        .collect()
}

#[pymodule]
fn stokes_afem_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMesh>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(generate_domain, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(indicators, m)?)?;
    m.add_function(wrap_pyfunction!(mark, m)?)?;
    m.add_function(wrap_pyfunction!(run_campaign, m)?)?;
    m.add_function(wrap_pyfunction!(reference_eigenvalue, m)?)?;
    m.add_function(wrap_pyfunction!(selftest, m)?)?;
    Ok(())
}
