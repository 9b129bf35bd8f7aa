use nalgebra::{DMatrix, DVector};

use super::ensure_finite;
use crate::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// `M = U·diag(σ)·Vᵀ` with `p = min(rows, cols)` singular triples, sorted
/// by descending `σ`.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    /// `rows × p`. Columns belonging to `σ = 0` are zero.
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    /// `cols × p`, orthonormal columns.
    pub v: DMatrix<f64>,
}

/// One-sided Jacobi SVD.
///
/// Slower than bidiagonalization but accurate to working precision on
/// rank-deficient input, which the pseudoinverse relies on.
pub fn thin_svd(m: &DMatrix<f64>) -> Result<ThinSvd> {
    ensure_finite(m, "svd input")?;
    if m.nrows() < m.ncols() {
        let t = thin_svd(&m.transpose())?;
        return Ok(ThinSvd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        });
    }
    let n = m.ncols();
    let mut a = m.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dot(&a.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numerical("Jacobi SVD did not converge".into()));
    }
    let sigma: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]).then(i.cmp(&j)));
    let mut u = DMatrix::zeros(a.nrows(), n);
    let mut vs = DMatrix::zeros(n, n);
    let mut values = DVector::zeros(n);
    for (k, &j) in order.iter().enumerate() {
        values[k] = sigma[j];
        if sigma[j] > 0.0 {
            u.set_column(k, &(a.column(j) / sigma[j]));
        }
        vs.set_column(k, &v.column(j));
    }
    Ok(ThinSvd {
        u,
        singular_values: values,
        v: vs,
    })
}

fn rotate(m: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    for r in 0..m.nrows() {
        let x = m[(r, p)];
        let y = m[(r, q)];
        m[(r, p)] = c * x - s * y;
        m[(r, q)] = s * x + c * y;
    }
}
