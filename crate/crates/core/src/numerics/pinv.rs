use nalgebra::DMatrix;

use super::{ensure_finite, thin_svd};
use crate::{Error, Result};

/// Singular values at or below `DEFAULT_RCOND · σ_max` are treated as zero.
pub const DEFAULT_RCOND: f64 = 1e-12;

/// Moore–Penrose pseudoinverse via the SVD.
///
/// Singular values `σ ≤ rcond · σ_max` are dropped. The result has the
/// transposed shape of `m`.
pub fn pinv(m: &DMatrix<f64>, rcond: f64) -> Result<DMatrix<f64>> {
    ensure_finite(m, "pinv input")?;
    if !(rcond >= 0.0) {
        return Err(Error::InvalidInput(format!("rcond must be >= 0, got {rcond}")));
    }
    let (rows, cols) = m.shape();
    let svd = thin_svd(m)?;
    let sigma_max = svd.singular_values.max();
    let mut out = DMatrix::zeros(cols, rows);
    if sigma_max == 0.0 {
        return Ok(out);
    }
    let cutoff = rcond * sigma_max;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= cutoff {
            continue;
        }
        // out += v_k · u_kᵀ / s
        out.ger(1.0 / s, &svd.v.column(k), &svd.u.column(k), 1.0);
    }
    Ok(out)
}

pub fn pinv_default(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    pinv(m, DEFAULT_RCOND)
}
