//! Sparse self-expression: one lasso per sample against all the other
//! samples, assembled into a zero-diagonal code matrix, then symmetrized
//! into an affinity graph.
//!
//! The lasso objective is `‖y − D·c‖₂² + λ‖c‖₁` (no ½ factor), so the
//! soft-threshold level for orthonormal `D` is `λ/2`.

use nalgebra::{DMatrix, DVector, DVectorView};
use rayon::prelude::*;

use crate::numerics::ensure_finite;
use crate::{Error, Result};

/// Stopping parameters shared by every lasso in a code-matrix build.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoOptions {
    pub lambda: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl LassoOptions {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            tol: 1e-6,
            max_iter: 2000,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidInput(format!("lasso lambda must be > 0, got {}", self.lambda)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidInput(format!("lasso tol must be > 0, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoSolution {
    pub coef: DVector<f64>,
    pub objective: f64,
    /// Primal–dual gap at `coef`; an upper bound on `objective − optimum`.
    pub gap: f64,
    /// Largest subgradient-optimality violation over coordinates.
    pub kkt_violation: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn soft_threshold(a: f64, t: f64) -> f64 {
    a.signum() * (a.abs() - t).max(0.0)
}

/// Minimizes `‖y − D·c‖₂² + λ‖c‖₁` with accelerated proximal gradient.
pub fn lasso_solve(y: &DVector<f64>, d: &DMatrix<f64>, opts: &LassoOptions) -> Result<LassoSolution> {
    ensure_finite(d, "lasso dictionary")?;
    if y.len() != d.nrows() {
        return Err(Error::InvalidInput(format!(
            "lasso: y has {} entries, D has {} rows",
            y.len(),
            d.nrows()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("lasso: y has non-finite entries".into()));
    }
    opts.validate()?;
    Ok(solve_working_set(y.as_view(), d, None, opts, None))
}

/// Power iteration (50 steps) for the top eigenvalue of a PSD matrix.
fn largest_gram_eigenvalue(g: &DMatrix<f64>) -> f64 {
    let n = g.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut rayleigh = 0.0;
    for _ in 0..50 {
        let w = g * &v;
        rayleigh = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            // start vector in the null space; fall back to a bound
            return g.diagonal().iter().map(|x| x.abs()).sum();
        }
        v = w / norm;
    }
    rayleigh.max(0.0)
}

struct Certificate {
    objective: f64,
    gap: f64,
    kkt: f64,
}

/// Objective, duality gap and KKT violation at `c`. `dual` is
/// `max_{‖Dᵀu‖∞ ≤ λ} uᵀy − ¼‖u‖²`, evaluated at `u = 2r` scaled to feasibility.
fn certify(y: DVectorView<f64>, d: &DMatrix<f64>, c: &DVector<f64>, lambda: f64, excluded: Option<usize>) -> Certificate {
    let r = y - d * c;
    let mut g = d.tr_mul(&r) * 2.0;
    if let Some(i) = excluded {
        g[i] = 0.0;
    }
    let l1 = c.lp_norm(1);
    let objective = r.norm_squared() + lambda * l1;
    let g_inf = g.amax();
    let scale = if g_inf > lambda { lambda / g_inf } else { 1.0 };
    let u = &r * (2.0 * scale);
    let dual = u.dot(&y) - 0.25 * u.norm_squared();
    let kkt = c
        .iter()
        .zip(g.iter())
        .map(|(&cj, &gj)| {
            if cj != 0.0 {
                (gj - lambda * cj.signum()).abs()
            } else {
                (gj.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max);
    Certificate {
        objective,
        gap: (objective - dual).max(0.0),
        kkt,
    }
}

fn done(c: &Certificate, opts: &LassoOptions) -> bool {
    c.gap <= opts.tol * (1.0 + (c.objective - c.gap).max(0.0)) && c.kkt <= opts.tol * opts.lambda
}

/// Smallest number of columns added to the working set per round.
const WORKING_SET_STEP: usize = 10;

/// Working-set driver around [`fista`]. FISTA runs on a few columns at a
/// time; the certificate is always taken on the full problem, and columns
/// with `|gᵢ| > λ` join the set (largest first, at least doubling it) until
/// the full certificate holds. `excluded` pins one coordinate at zero, which
/// is how self-expression leaves a sample out without copying `D`.
fn solve_working_set(
    y: DVectorView<f64>,
    d: &DMatrix<f64>,
    excluded: Option<usize>,
    opts: &LassoOptions,
    start: Option<DVector<f64>>,
) -> LassoSolution {
    let p = d.ncols();
    let lambda = opts.lambda;
    let mut x = start.unwrap_or_else(|| DVector::zeros(p));
    if let Some(i) = excluded {
        x[i] = 0.0;
    }
    let mut in_set: Vec<bool> = x.iter().map(|&v| v != 0.0).collect();
    let mut sub_tol = opts.tol;
    let mut iterations = 0;
    loop {
        let cert = certify(y, d, &x, lambda, excluded);
        let converged = done(&cert, opts);
        if converged || iterations >= opts.max_iter || sub_tol < 1e-15 {
            return LassoSolution {
                coef: x,
                objective: cert.objective,
                gap: cert.gap,
                kkt_violation: cert.kkt,
                iterations,
                converged,
            };
        }
        let g = d.tr_mul(&(y - d * &x)) * 2.0;
        let mut violators: Vec<usize> = (0..p)
            .filter(|&j| Some(j) != excluded && !in_set[j] && g[j].abs() > lambda)
            .collect();
        violators.sort_by(|&a, &b| g[b].abs().total_cmp(&g[a].abs()).then(a.cmp(&b)));
        let size = in_set.iter().filter(|&&b| b).count();
        if violators.is_empty() {
            // the restricted problem is not solved tightly enough yet
            sub_tol *= 0.1;
        }
        for &j in violators.iter().take(size.max(WORKING_SET_STEP)) {
            in_set[j] = true;
        }
        let cols: Vec<usize> = (0..p).filter(|&j| in_set[j]).collect();
        let sub = d.select_columns(&cols);
        let gram_top = if sub.nrows() <= sub.ncols() {
            largest_gram_eigenvalue(&(&sub * sub.transpose()))
        } else {
            largest_gram_eigenvalue(&sub.tr_mul(&sub))
        };
        let sub_opts = LassoOptions {
            lambda,
            tol: sub_tol,
            max_iter: opts.max_iter - iterations,
        };
        let sub_start = DVector::from_iterator(cols.len(), cols.iter().map(|&j| x[j]));
        let sol = fista(y, &sub, gram_top, &sub_opts, sub_start);
        iterations += sol.iterations;
        x.fill(0.0);
        for (k, &j) in cols.iter().enumerate() {
            x[j] = sol.coef[k];
        }
    }
}

/// FISTA with function-value restart; `gram_top` is `σ_max(D)²`.
fn fista(
    y: DVectorView<f64>,
    d: &DMatrix<f64>,
    gram_top: f64,
    opts: &LassoOptions,
    start: DVector<f64>,
) -> LassoSolution {
    let p = d.ncols();
    let lambda = opts.lambda;
    if gram_top <= 0.0 {
        let zero = DVector::zeros(p);
        let cert = certify(y, d, &zero, lambda, None);
        return LassoSolution {
            coef: zero,
            objective: cert.objective,
            gap: cert.gap,
            kkt_violation: cert.kkt,
            iterations: 0,
            converged: true,
        };
    }
    // gradient of ‖y − Dc‖² is 2Dᵀ(Dc − y): Lipschitz constant 2σ_max²
    let mut lip = 2.0 * gram_top * 1.01;
    let mut x = start;
    let residual_at = |c: &DVector<f64>, out: &mut DVector<f64>| {
        out.copy_from(&y);
        out.gemv(-1.0, d, c, 1.0);
    };
    // Residuals are affine in the iterate, so the momentum residual is
    // extrapolated from those of `x` and `next` instead of recomputed.
    let mut r_x = DVector::zeros(y.len());
    residual_at(&x, &mut r_x);
    let mut fx = r_x.norm_squared() + lambda * x.lp_norm(1);
    let mut momentum = x.clone();
    let mut r_mom = r_x.clone();
    let mut next = DVector::zeros(p);
    let mut r_next = DVector::zeros(y.len());
    let mut grad = DVector::zeros(p);
    let mut t = 1.0f64;
    let mut restarted_plain = false;
    let mut iterations = 0;
    let mut cert = certify(y, d, &x, lambda, None);
    let mut converged = done(&cert, opts);

    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let step = 1.0 / lip;
        grad.gemv_tr(2.0 * step, d, &r_mom, 0.0);
        for j in 0..p {
            next[j] = soft_threshold(momentum[j] + grad[j], lambda * step);
        }
        residual_at(&next, &mut r_next);
        let f_next = r_next.norm_squared() + lambda * next.lp_norm(1);
        let slack = 1e-13 * (1.0 + fx.abs());
        if f_next > fx && !(restarted_plain && f_next <= fx + slack) {
            if restarted_plain {
                // a plain proximal step failed to descend: step too long
                lip *= 2.0;
            }
            momentum.copy_from(&x);
            r_mom.copy_from(&r_x);
            t = 1.0;
            restarted_plain = true;
            continue;
        }
        restarted_plain = false;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        for j in 0..p {
            momentum[j] = next[j] + beta * (next[j] - x[j]);
        }
        for k in 0..r_mom.len() {
            r_mom[k] = r_next[k] + beta * (r_next[k] - r_x[k]);
        }
        t = t_next;
        std::mem::swap(&mut x, &mut next);
        std::mem::swap(&mut r_x, &mut r_next);
        fx = f_next;
        if iterations % 10 == 0 || iterations == opts.max_iter {
            cert = certify(y, d, &x, lambda, None);
            converged = done(&cert, opts);
            // resynchronize the extrapolated residual
            residual_at(&momentum, &mut r_mom);
        }
    }
    if !converged {
        cert = certify(y, d, &x, lambda, None);
        converged = done(&cert, opts);
    }
    LassoSolution {
        coef: x,
        objective: cert.objective,
        gap: cert.gap,
        kkt_violation: cert.kkt,
        iterations,
        converged,
    }
}

/// `m × m` self-expression codes; column `i` expresses sample `i` through the
/// others, and the diagonal is exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeMatrix {
    pub matrix: DMatrix<f64>,
    pub lambda: f64,
}

impl CodeMatrix {
    pub fn zeros(m: usize, lambda: f64) -> Self {
        Self {
            matrix: DMatrix::zeros(m, m),
            lambda,
        }
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    /// `(i, j, value)` for entries with `|value| > threshold`, column-major order.
    pub fn triplets(&self, threshold: f64) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (j, col) in self.matrix.column_iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                if v.abs() > threshold {
                    out.push((i, j, v));
                }
            }
        }
        out
    }
}

/// Solves the `m` self-expression lassos of `z`'s columns.
///
/// Column solves are independent and run in parallel; `warm` seeds each
/// solve with the previous codes. The result does not depend on the worker
/// count.
pub fn build_code_matrix(z: &DMatrix<f64>, opts: &LassoOptions, warm: Option<&CodeMatrix>) -> Result<CodeMatrix> {
    ensure_finite(z, "representation Z")?;
    opts.validate()?;
    let m = z.ncols();
    if m < 2 {
        return Err(Error::InvalidInput("code matrix needs at least two samples".into()));
    }
    if let Some(w) = warm {
        if w.size() != m {
            return Err(Error::InvalidInput("warm-start code matrix has the wrong size".into()));
        }
    }
    let columns: Vec<LassoSolution> = (0..m)
        .into_par_iter()
        .map(|i| {
            let start = warm.map(|w| w.matrix.column(i).into_owned());
            solve_working_set(z.column(i), z, Some(i), opts, start)
        })
        .collect();
    let unconverged = columns.iter().filter(|s| !s.converged).count();
    if unconverged > 0 {
        log::debug!("{unconverged}/{m} lasso columns hit the iteration cap");
    }
    let mut matrix = DMatrix::zeros(m, m);
    for (i, sol) in columns.into_iter().enumerate() {
        let mut col = sol.coef;
        col[i] = 0.0;
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("lasso column {i} produced non-finite codes")));
        }
        matrix.set_column(i, &col);
    }
    Ok(CodeMatrix {
        matrix,
        lambda: opts.lambda,
    })
}

/// Symmetric, nonnegative, zero-diagonal graph weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    pub matrix: DMatrix<f64>,
}

impl AffinityMatrix {
    /// Checks the invariants on an externally supplied matrix.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        ensure_finite(&matrix, "affinity")?;
        if !matrix.is_square() {
            return Err(Error::InvalidInput("affinity must be square".into()));
        }
        if matrix.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidInput("affinity must be nonnegative".into()));
        }
        if matrix != matrix.transpose() {
            return Err(Error::InvalidInput("affinity must be symmetric".into()));
        }
        Ok(Self { matrix })
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }
}

/// `A = |C| + |C|ᵀ`.
pub fn affinity(codes: &CodeMatrix) -> AffinityMatrix {
    let c = &codes.matrix;
    let m = c.nrows();
    let matrix = DMatrix::from_fn(m, m, |i, j| c[(i, j)].abs() + c[(j, i)].abs());
    AffinityMatrix { matrix }
}

/// `‖C_new − C_old‖_F / max(‖C_old‖_F, 1e-12)`, the outer-loop stopping statistic.
pub fn code_delta(new: &CodeMatrix, old: &CodeMatrix) -> Result<f64> {
    if new.matrix.shape() != old.matrix.shape() {
        return Err(Error::InvalidInput("code matrices differ in size".into()));
    }
    Ok((&new.matrix - &old.matrix).norm() / old.matrix.norm().max(1e-12))
}
