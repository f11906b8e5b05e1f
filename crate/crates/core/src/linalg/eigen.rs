use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CsrMatrix, LinalgError, SparseLu};

/// Solver knobs for [`shift_invert_eigensolve`].
#[derive(Clone, Debug)]
pub struct EigenOptions {
    pub shift: f64,
    pub nev: usize,
    /// Bound on `‖K x − λ D x‖₂ / ‖x‖₂` for every returned pair.
    pub tol: f64,
    /// Maximum number of Arnoldi restarts.
    pub max_iter: usize,
    /// Krylov subspace size; `max(20, 4·nev)` when unset.
    pub ncv: Option<usize>,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            shift: 0.0,
            nev: 1,
            tol: 1e-10,
            max_iter: 300,
            ncv: None,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EigenPair {
    pub lambda: f64,
    /// Scaled so that `|xᵀ D x| = 1` (Euclidean unit length when `D x = 0`), with
    /// its largest-magnitude entry positive.
    pub vector: Vec<f64>,
    /// `‖K x − λ D x‖₂ / ‖x‖₂`.
    pub residual: f64,
}

/// Relative residual `‖K x − λ D x‖₂ / ‖x‖₂`.
pub fn pencil_residual(k: &CsrMatrix, d: &CsrMatrix, lambda: f64, x: &[f64]) -> f64 {
    let kx = k.matvec(x);
    let dx = d.matvec(x);
    let r: f64 = kx.iter().zip(&dx).map(|(a, b)| (a - lambda * b).powi(2)).sum();
    r.sqrt() / norm(x)
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Eigenpairs of `K x = λ D x` closest to `shift`, by Arnoldi iteration on
/// `x ↦ (K − sD)⁻¹ D x` with explicit restarts.
///
/// Ritz values `ν` map back to `λ = s + 1/ν`. `D` may be singular: the start vector
/// is pushed through the operator once so it lies in its range, and Ritz values
/// with `|ν| < 1e−12·‖op‖` (infinite `λ`) are discarded. Fewer than `nev` pairs are
/// returned only when the operator range is smaller than `nev`.
pub fn shift_invert_eigensolve(
    k: &CsrMatrix,
    d: &CsrMatrix,
    opts: &EigenOptions,
) -> Result<Vec<EigenPair>, LinalgError> {
    let n = k.dim();
    if d.dim() != n {
        return Err(LinalgError::DimensionMismatch { expected: n, found: d.dim() });
    }
    let shifted = k.add_scaled(-opts.shift, d)?;
    let lu = SparseLu::factor(&shifted)?;
    let op = |x: &[f64]| lu.solve(&d.matvec(x));

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut start: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    start = op(&start)?;
    if norm(&start) == 0.0 {
        return Err(LinalgError::EmptyRange);
    }

    let m = opts.ncv.unwrap_or_else(|| (4 * opts.nev).max(20)).min(n).max(1);
    let mut best_residual = f64::INFINITY;
    let mut breakdowns = 0;
    for _ in 0..opts.max_iter.max(1) {
        let nrm = norm(&start);
        let mut basis: Vec<Vec<f64>> = vec![start.iter().map(|v| v / nrm).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut size = m;
        let mut broke_down = false;
        for j in 0..m {
            let mut w = op(&basis[j])?;
            let w_norm0 = norm(&w);
            // Classical Gram–Schmidt, applied twice.
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let c = dot(v, &w);
                    h[i][j] += c;
                    for (wk, vk) in w.iter_mut().zip(v) {
                        *wk -= c * vk;
                    }
                }
            }
            let w_norm = norm(&w);
            h[j + 1][j] = w_norm;
            if w_norm <= 1e-12 * w_norm0 || w_norm == 0.0 {
                size = j + 1;
                broke_down = true;
                break;
            }
            if j + 1 < m {
                basis.push(w.iter().map(|v| v / w_norm).collect());
            }
        }

        let hm = Mat::<f64>::from_fn(size, size, |i, j| h[i][j]);
        let evd = hm.eigen().map_err(|e| LinalgError::DenseEigen(format!("{e:?}")))?;
        let s = evd.S().column_vector();
        let u = evd.U();
        let op_norm = (0..size).map(|i| s[i].re.hypot(s[i].im)).fold(0.0, f64::max);
        let mut order: Vec<usize> = (0..size)
            .filter(|&i| s[i].re.hypot(s[i].im) > 1e-12 * op_norm)
            .collect();
        order.sort_by(|&a, &b| {
            let ma = s[a].re.hypot(s[a].im);
            let mb = s[b].re.hypot(s[b].im);
            mb.partial_cmp(&ma).unwrap().then(a.cmp(&b))
        });
        // Conjugate pairs: keep one representative.
        order.dedup_by(|a, b| (s[*a].re - s[*b].re).abs() <= 1e-14 * op_norm && (s[*a].im + s[*b].im).abs() <= 1e-14 * op_norm);
        order.truncate(opts.nev);
        if order.is_empty() {
            return Err(LinalgError::EmptyRange);
        }

        let mut pairs = Vec::with_capacity(order.len());
        let mut converged = true;
        let mut next_start = vec![0.0; n];
        for &i in &order {
            let nu = s[i];
            // λ = s + 1/ν in complex arithmetic.
            let mod2 = nu.re * nu.re + nu.im * nu.im;
            let lam_re = opts.shift + nu.re / mod2;
            let lam_im = -nu.im / mod2;
            // Rotate the Ritz vector so its largest coefficient is real.
            let mut pivot = 0;
            for r in 0..size {
                if u[(r, i)].re.hypot(u[(r, i)].im) > u[(pivot, i)].re.hypot(u[(pivot, i)].im) {
                    pivot = r;
                }
            }
            let p = u[(pivot, i)];
            let pm = p.re.hypot(p.im);
            let (cr, ci) = (p.re / pm, -p.im / pm);
            let mut x = vec![0.0; n];
            for (r, v) in basis.iter().enumerate().take(size) {
                let y = u[(r, i)].re * cr - u[(r, i)].im * ci;
                for (xk, vk) in x.iter_mut().zip(v) {
                    *xk += y * vk;
                }
            }
            normalize(&mut x, d);
            let res = pencil_residual(k, d, lam_re, &x);
            if res > opts.tol || lam_im.abs() > 1e-8 * lam_re.abs() {
                converged = false;
            }
            best_residual = best_residual.min(res);
            let weight = res.max(f64::EPSILON);
            let xn = norm(&x);
            for (sk, xk) in next_start.iter_mut().zip(&x) {
                *sk += weight * xk / xn;
            }
            pairs.push((lam_re, lam_im, x, res));
        }

        if converged {
            return Ok(pairs
                .into_iter()
                .map(|(lambda, _, vector, residual)| EigenPair { lambda, vector, residual })
                .collect());
        }
        if let Some((re, im, _, res)) = pairs.iter().find(|p| p.1.abs() > 1e-8 * p.0.abs()) {
            if *res <= opts.tol {
                return Err(LinalgError::ComplexEigenvalue { re: *re, im: *im });
            }
        }
        if broke_down {
            // The subspace was invariant but the pairs are not accurate: perturb once.
            breakdowns += 1;
            if breakdowns > 1 {
                return Err(LinalgError::Breakdown);
            }
            for v in next_start.iter_mut() {
                *v += 1e-3 * rng.gen_range(-1.0..1.0);
            }
            next_start = op(&next_start)?;
        }
        start = next_start;
    }
    Err(LinalgError::NoConvergence {
        iterations: opts.max_iter,
        residual: best_residual,
    })
}

fn normalize(x: &mut [f64], d: &CsrMatrix) {
    let dx = d.matvec(x);
    let q = dot(x, &dx).abs();
    let scale = if q > 1e-300 { q.sqrt() } else { norm(x) };
    let big = x.iter().copied().fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
    let sign = if big < 0.0 { -1.0 } else { 1.0 };
    for v in x.iter_mut() {
        *v *= sign / scale;
    }
}
