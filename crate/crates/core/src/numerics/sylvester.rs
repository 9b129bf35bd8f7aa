//! Dense Sylvester solver `A·W + W·B = Q` (Bartels–Stewart family).
//!
//! Two routes share one contract:
//!
//! * `A` symmetric: `A = V·Λ·Vᵀ` decouples the rows of `Vᵀ·W`, each of which
//!   solves `(λ_i·I + Bᵀ)·w̃_i = q̃_i` by LU. This is the shape that arises in
//!   the representation update, where `A` is a small Gram matrix and `B` is
//!   `m × m`.
//! * general `A`: complex Schur forms of both sides, then column-by-column
//!   triangular back substitution.
//!
//! Both are `O(n³ + m³)`; the `m³` term is the scalability wall for the
//! pipeline.

use nalgebra::{Complex, DMatrix, SymmetricEigen};
use nalgebra::linalg::Schur;

use super::ensure_finite;
use crate::{Error, Result};

const OVERLAP_TOL: f64 = 1e-12;
const RESIDUAL_FLOOR: f64 = 1e-12;
const RESIDUAL_TOL: f64 = 1e-8;
const SYMMETRY_TOL: f64 = 1e-12;

/// Solves `A·W + W·B = Q` for `W` (`A` is `n×n`, `B` is `m×m`, `Q` is `n×m`).
///
/// Fails with [`Error::SingularSylvester`] when the spectra of `A` and `-B`
/// overlap within `1e-12` (relative to the operator scale), or when the
/// computed solution misses the relative residual bound `1e-8`.
pub fn sylvester_solve(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    ensure_finite(a, "Sylvester A")?;
    ensure_finite(b, "Sylvester B")?;
    ensure_finite(q, "Sylvester Q")?;
    let (n, m) = (a.nrows(), b.nrows());
    if !a.is_square() || !b.is_square() || q.shape() != (n, m) {
        return Err(Error::InvalidInput(format!(
            "Sylvester shapes: A {:?}, B {:?}, Q {:?}",
            a.shape(),
            b.shape(),
            q.shape()
        )));
    }
    let scale = a.norm().max(b.norm()).max(f64::MIN_POSITIVE);

    let w = if (a - a.transpose()).norm() <= SYMMETRY_TOL * scale {
        solve_symmetric_left(a, b, q, scale)?
    } else {
        solve_schur(a, b, q, scale)?
    };

    let residual = (a * &w + &w * b - q).norm() / q.norm().max(RESIDUAL_FLOOR);
    if !residual.is_finite() || residual > RESIDUAL_TOL {
        log::debug!("Sylvester relative residual {residual:e} exceeds bound");
        return Err(Error::SingularSylvester { gap: f64::NAN });
    }
    Ok(w)
}

fn solve_symmetric_left(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    scale: f64,
) -> Result<DMatrix<f64>> {
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let v = &eig.eigenvectors;
    let q_rot = v.transpose() * q;
    let b_t = b.transpose();
    let (n, m) = q.shape();
    let mut w_rot = DMatrix::zeros(n, m);
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        let mut shifted = b_t.clone();
        for d in 0..m {
            shifted[(d, d)] += lambda;
        }
        let lu = shifted.lu();
        let u = lu.u();
        let min_pivot = u.diagonal().iter().fold(f64::INFINITY, |acc, p| acc.min(p.abs()));
        if min_pivot <= OVERLAP_TOL * scale {
            return Err(Error::SingularSylvester { gap: min_pivot });
        }
        let rhs = q_rot.row(i).transpose();
        let sol = lu
            .solve(&rhs)
            .ok_or(Error::SingularSylvester { gap: min_pivot })?;
        w_rot.set_row(i, &sol.transpose());
    }
    Ok(v * w_rot)
}

fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex<f64>> {
    m.map(|v| Complex::new(v, 0.0))
}

fn complex_schur(m: &DMatrix<f64>) -> Result<(DMatrix<Complex<f64>>, DMatrix<Complex<f64>>)> {
    Schur::try_new(to_complex(m), f64::EPSILON, 0)
        .map(Schur::unpack)
        .ok_or_else(|| Error::Numerical("Schur decomposition did not converge".into()))
}

fn solve_schur(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    scale: f64,
) -> Result<DMatrix<f64>> {
    let (ua, ta) = complex_schur(a)?;
    let (ub, tb) = complex_schur(b)?;
    let (n, m) = q.shape();

    let min_gap = (0..n)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .map(|(i, j)| (ta[(i, i)] + tb[(j, j)]).norm())
        .fold(f64::INFINITY, f64::min);
    if min_gap <= OVERLAP_TOL * scale {
        return Err(Error::SingularSylvester { gap: min_gap });
    }

    let f = ua.adjoint() * to_complex(q) * &ub;
    let mut y = DMatrix::<Complex<f64>>::zeros(n, m);
    for j in 0..m {
        let mut rhs = f.column(j).clone_owned();
        for k in 0..j {
            let t = tb[(k, j)];
            if t != Complex::new(0.0, 0.0) {
                rhs -= y.column(k) * t;
            }
        }
        // (T_A + t_jj·I) y_j = rhs, upper triangular
        let shift = tb[(j, j)];
        for i in (0..n).rev() {
            let mut acc = rhs[i];
            for c in (i + 1)..n {
                acc -= ta[(i, c)] * y[(c, j)];
            }
            y[(i, j)] = acc / (ta[(i, i)] + shift);
        }
    }
    let w = ua * y * ub.adjoint();
    Ok(w.map(|z| z.re))
}
