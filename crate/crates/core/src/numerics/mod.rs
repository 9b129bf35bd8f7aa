//! Dense linear-algebra kernels shared by the rest of the crate.
//!
//! Matrices are plain [`nalgebra::DMatrix<f64>`]. Every entry point rejects
//! non-finite input with [`Error::InvalidInput`](crate::Error::InvalidInput).

mod eigh;
mod kmeans;
mod pinv;
mod svd;
mod sylvester;

pub use eigh::{eigh, Which};
pub use kmeans::{kmeans, KMeansOptions, KMeansResult};
pub use pinv::{pinv, pinv_default, DEFAULT_RCOND};
pub use svd::{thin_svd, ThinSvd};
pub use sylvester::sylvester_solve;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

pub(crate) fn ensure_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::InvalidInput(format!("{what} is empty")));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("{what} has non-finite entries")));
    }
    Ok(())
}

/// Seeded generator used throughout; ChaCha keeps streams identical across platforms.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Product of a non-empty chain of matrices, left to right.
pub fn chain_product<'a, I>(mats: I) -> Option<DMatrix<f64>>
where
    I: IntoIterator<Item = &'a DMatrix<f64>>,
{
    let mut it = mats.into_iter();
    let first = it.next()?.clone();
    Some(it.fold(first, |acc, m| acc * m))
}
