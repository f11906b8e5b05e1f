//! Marking, the solve–estimate–mark–refine loop and convergence bookkeeping.

mod reference;

pub use reference::{extrapolate_reference, reference_eigenvalue, richardson_fit, RichardsonFit, LSHAPE_REFERENCE, SQUARE_REFERENCE, TSHAPE_REFERENCE};

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{assemble_full, assemble_reduced, AssemblyError, Scheme};
use crate::estimators::{compute_eta, compute_theta, EstimatorError, IndicatorField, SpectralSolution};
use crate::fe::DofMap;
use crate::linalg::{EigenOptions, LinalgError};
use crate::mesh::{generate_domain, Domain, Mesh, MeshError};

#[derive(Debug, Error)]
pub enum AdaptivityError {
    #[error("all indicators are zero; nothing to mark")]
    ZeroIndicators,
    #[error("indicator field is empty")]
    EmptyIndicators,
    #[error("marking fraction must lie in (0, 1], got {0}")]
    BadFraction(f64),
    #[error("need at least 2 points with positive error to fit a rate, have {0}")]
    TooFewPoints(usize),
    #[error("estimator is zero")]
    ZeroEstimator,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error("observer failed: {0}")]
    Observer(#[source] Box<dyn std::error::Error + Send + Sync>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    /// `η`, full scheme only.
    Eta,
    /// `θ`.
    Theta,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Eta => "eta",
            EstimatorKind::Theta => "theta",
        }
    }
}

impl FromStr for EstimatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "eta" => Ok(EstimatorKind::Eta),
            "theta" => Ok(EstimatorKind::Theta),
            _ => Err(format!("unknown estimator '{s}' (expected eta or theta)")),
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefineMode {
    /// Red refinement of every element (N grows about 4× per step).
    Uniform,
    /// One bisection of every element (N grows about 2× per step).
    UniformBisect,
    /// Bisection of the elements marked by the indicator.
    Adaptive,
}

impl RefineMode {
    pub fn name(self) -> &'static str {
        match self {
            RefineMode::Uniform => "uniform",
            RefineMode::UniformBisect => "uniform-bisect",
            RefineMode::Adaptive => "adaptive",
        }
    }
}

impl FromStr for RefineMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(RefineMode::Uniform),
            "uniform-bisect" => Ok(RefineMode::UniformBisect),
            "adaptive" => Ok(RefineMode::Adaptive),
            _ => Err(format!("unknown refinement '{s}' (expected uniform, uniform-bisect or adaptive)")),
        }
    }
}

impl fmt::Display for RefineMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One campaign. Every field has a default, so `{"domain": "tshape"}` is a valid
/// JSON config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub domain: Domain,
    pub scheme: Scheme,
    pub refine: RefineMode,
    pub estimator: EstimatorKind,
    pub mu: f64,
    pub n0: usize,
    /// Number of refinements; the table has at most `max_iter + 1` rows.
    pub max_iter: usize,
    /// Stop before solving on a mesh with more unknowns than this.
    pub dof_cap: usize,
    /// Marking threshold relative to the largest local indicator.
    pub fraction: f64,
    pub shift: f64,
    /// Use the previous `λ_h1` as the shift from the second iteration on.
    pub warm_shift: bool,
    pub nev: usize,
    pub tol: f64,
    pub seed: u64,
    /// Overrides the built-in reference eigenvalue.
    pub lambda_ref: Option<f64>,
    pub out: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            domain: Domain::TShape,
            scheme: Scheme::Full,
            refine: RefineMode::Adaptive,
            estimator: EstimatorKind::Eta,
            mu: 0.5,
            n0: 6,
            max_iter: 15,
            dof_cap: 500_000,
            fraction: 0.5,
            shift: 0.0,
            warm_shift: true,
            nev: 1,
            tol: 1e-10,
            seed: 0x5eed,
            lambda_ref: None,
            out: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), AdaptivityError> {
        let bad = |m: &str| Err(AdaptivityError::Config(m.to_string()));
        if self.estimator == EstimatorKind::Eta && self.scheme != Scheme::Full {
            return bad("estimator eta needs scheme full (the reduced scheme has no pressure)");
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return bad("mu must be positive");
        }
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return bad("fraction must lie in (0, 1]");
        }
        if self.nev == 0 {
            return bad("nev must be at least 1");
        }
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if self.n0 == 0 || (self.domain == Domain::TShape && self.n0 % 6 != 0) {
            return bad("n0 must be positive, and a multiple of 6 for tshape");
        }
        if let Some(l) = self.lambda_ref {
            if !(l > 0.0 && l.is_finite()) {
                return bad("lambda_ref must be positive");
            }
        }
        Ok(())
    }

    /// `lambda_ref` if set, else the built-in value for the domain at this `μ`.
    pub fn reference(&self) -> f64 {
        self.lambda_ref
            .unwrap_or_else(|| reference_eigenvalue(self.domain, self.mu))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub n_dofs: usize,
    pub lambda_h1: f64,
    /// All computed eigenvalues, ascending by distance to the shift.
    pub lambdas: Vec<f64>,
    pub err: f64,
    pub estimator_sq: f64,
    pub effectivity: f64,
    pub elements: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub records: Vec<IterationRecord>,
}

impl ConvergenceTable {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }
}

/// Everything known at the end of one iteration, handed to the observer.
pub struct IterationState<'a> {
    pub record: &'a IterationRecord,
    pub mesh: &'a Mesh,
    pub solution: &'a SpectralSolution,
    pub indicators: &'a IndicatorField,
}

/// A failed campaign keeps the rows that completed.
#[derive(Debug, Error)]
#[error("campaign stopped after {} iterations: {source}", partial.len())]
pub struct CampaignError {
    pub partial: ConvergenceTable,
    #[source]
    pub source: AdaptivityError,
}

/// Elements with `β_T ≥ fraction · max β`, `β_T` the unsquared local indicator.
pub fn mark_elements(indicators: &IndicatorField, fraction: f64) -> Result<Vec<usize>, AdaptivityError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(AdaptivityError::BadFraction(fraction));
    }
    let beta = indicators.beta();
    if beta.is_empty() {
        return Err(AdaptivityError::EmptyIndicators);
    }
    let max = beta.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(AdaptivityError::ZeroIndicators);
    }
    let threshold = fraction * max;
    Ok((0..beta.len()).filter(|&t| beta[t] >= threshold).collect())
}

/// `err / estimator²`.
pub fn effectivity(err: f64, estimator_sq: f64) -> Result<f64, AdaptivityError> {
    if estimator_sq == 0.0 {
        return Err(AdaptivityError::ZeroEstimator);
    }
    Ok(err / estimator_sq)
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_loglog(x: &[f64], y: &[f64]) -> Result<f64, AdaptivityError> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(AdaptivityError::TooFewPoints(pts.len()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(AdaptivityError::TooFewPoints(1));
    }
    Ok(sxy / sxx)
}

/// Slope of `log err` against `log N` over the last `window` rows.
pub fn fit_rate(table: &ConvergenceTable, window: usize) -> Result<f64, AdaptivityError> {
    let start = table.len().saturating_sub(window);
    let rows = &table.records[start..];
    let n: Vec<f64> = rows.iter().map(|r| r.n_dofs as f64).collect();
    let e: Vec<f64> = rows.iter().map(|r| r.err).collect();
    fit_loglog(&n, &e)
}

pub fn run_campaign(config: &RunConfig) -> Result<ConvergenceTable, CampaignError> {
    run_campaign_with(config, |_| Ok(()))
}

/// Runs the loop, calling `observer` after every completed iteration. An observer
/// error aborts the campaign like a solver failure.
pub fn run_campaign_with<F>(config: &RunConfig, mut observer: F) -> Result<ConvergenceTable, CampaignError>
where
    F: FnMut(&IterationState) -> Result<(), AdaptivityError>,
{
    let mut table = ConvergenceTable::default();
    match campaign(config, &mut table, &mut observer) {
        Ok(()) => Ok(table),
        Err(source) => Err(CampaignError { partial: table, source }),
    }
}

fn campaign<F>(config: &RunConfig, table: &mut ConvergenceTable, observer: &mut F) -> Result<(), AdaptivityError>
where
    F: FnMut(&IterationState) -> Result<(), AdaptivityError>,
{
    config.validate()?;
    let lambda_ref = config.reference();
    let mut mesh = generate_domain(config.domain, config.n0)?;
    let mut shift = config.shift;
    for iter in 0..=config.max_iter {
        let dofmap = DofMap::new(&mesh);
        let n_dofs = match config.scheme {
            Scheme::Full => dofmap.n_total(),
            Scheme::Reduced => dofmap.n_total() - dofmap.n_pressure(),
        };
        if iter > 0 && n_dofs > config.dof_cap {
            log::info!("stopping before iteration {iter}: N = {n_dofs} exceeds the cap {}", config.dof_cap);
            break;
        }
        let start = Instant::now();
        let system = match config.scheme {
            Scheme::Full => assemble_full(&mesh, &dofmap, config.mu)?,
            Scheme::Reduced => assemble_reduced(&mesh, &dofmap, config.mu)?,
        };
        let opts = EigenOptions {
            shift,
            nev: config.nev,
            tol: config.tol,
            seed: config.seed,
            ..Default::default()
        };
        let pairs = system.eigensolve(&opts)?;
        let mut lambdas: Vec<f64> = pairs.iter().map(|p| p.lambda).collect();
        let lowest = (0..pairs.len())
            .min_by(|&a, &b| lambdas[a].partial_cmp(&lambdas[b]).unwrap())
            .ok_or(LinalgError::EmptyRange)?;
        let solution = SpectralSolution::from_eigenpair(&pairs[lowest], &system.layout, config.mu)?;
        let geometry = mesh.geometry()?;
        let indicators = match config.estimator {
            EstimatorKind::Eta => compute_eta(&mesh, &geometry, &solution)?,
            EstimatorKind::Theta => compute_theta(&mesh, &geometry, &solution)?,
        };
        let lambda_h1 = solution.lambda;
        let err = (lambda_ref - lambda_h1).abs();
        let estimator_sq = indicators.global_sq();
        lambdas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let record = IterationRecord {
            iter,
            n_dofs,
            lambda_h1,
            lambdas,
            err,
            estimator_sq,
            effectivity: effectivity(err, estimator_sq)?,
            elements: mesh.n_triangles(),
            seconds: start.elapsed().as_secs_f64(),
        };
        log::info!(
            "iter {iter}: N = {n_dofs}, lambda = {lambda_h1:.8}, err = {err:.3e}, est^2 = {estimator_sq:.3e}"
        );
        table.records.push(record);
        observer(&IterationState {
            record: table.records.last().unwrap(),
            mesh: &mesh,
            solution: &solution,
            indicators: &indicators,
        })?;
        if iter == config.max_iter {
            break;
        }
        if config.warm_shift {
            shift = lambda_h1;
        }
        mesh = match config.refine {
            RefineMode::Uniform => mesh.uniform_refine(),
            RefineMode::UniformBisect => {
                let all: Vec<usize> = (0..mesh.n_triangles()).collect();
                mesh.bisect_marked(&all)?
            }
            RefineMode::Adaptive => {
                let marked = mark_elements(&indicators, config.fraction)?;
                mesh.bisect_marked(&marked)?
            }
        };
    }
    Ok(())
}
