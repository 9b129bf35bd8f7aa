use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::ensure_finite;
use crate::{Error, Result};

const ASYMMETRY_TOL: f64 = 1e-6;

/// Which end of the spectrum [`eigh`] returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Smallest,
    Largest,
}

/// `k` eigenpairs of a symmetric matrix, eigenvalues ascending.
///
/// The input is symmetrized as `(S + Sᵀ)/2` first; relative asymmetry above
/// `1e-6` is rejected. Each eigenvector is signed so that its
/// largest-magnitude entry is positive.
pub fn eigh(s: &DMatrix<f64>, k: usize, which: Which) -> Result<(DVector<f64>, DMatrix<f64>)> {
    ensure_finite(s, "eigh input")?;
    let n = s.nrows();
    if !s.is_square() {
        return Err(Error::InvalidInput(format!("eigh needs a square matrix, got {:?}", s.shape())));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!("eigh: k = {k} outside 1..={n}")));
    }
    let asym = (s - s.transpose()).norm();
    if asym > ASYMMETRY_TOL * s.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidInput(format!("eigh: matrix not symmetric (‖S−Sᵀ‖ = {asym:e})")));
    }
    let sym = (s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));
    let picked = match which {
        Which::Smallest => &order[..k],
        Which::Largest => &order[n - k..],
    };

    let values = DVector::from_iterator(k, picked.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, k);
    for (c, &i) in picked.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).clone_owned();
        let pivot = v.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            v.neg_mut();
        }
        vectors.set_column(c, &v);
    }
    Ok((values, vectors))
}
