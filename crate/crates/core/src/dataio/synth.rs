use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::features::FeatureMatrix;
use crate::numerics::rng_from_seed;
use crate::{Error, Result};

/// Parameters of a union-of-subspaces dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub clusters: usize,
    pub subspace_dim: usize,
    pub ambient_dim: usize,
    pub points_per_cluster: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        if self.clusters < 2 {
            return Err(Error::InvalidInput("synthetic data needs at least 2 clusters".into()));
        }
        if self.subspace_dim == 0 || self.subspace_dim >= self.ambient_dim {
            return Err(Error::InvalidInput(format!(
                "subspace_dim {} must be in 1..{}",
                self.subspace_dim, self.ambient_dim
            )));
        }
        if self.points_per_cluster == 0 {
            return Err(Error::InvalidInput("points_per_cluster must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::InvalidInput("noise_sigma must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Points drawn from `clusters` random subspaces, plus Gaussian noise, with
/// every column scaled to unit ℓ2 norm.
///
/// Columns are grouped by cluster; ground-truth labels are `1..=clusters`
/// (`0` is reserved for unlabeled pixels). Pixel coordinates are `(0, j)`.
pub fn synth_subspaces(spec: &SyntheticSpec) -> Result<(FeatureMatrix, Vec<u32>)> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let (d, s, per) = (spec.ambient_dim, spec.subspace_dim, spec.points_per_cluster);
    let m = spec.clusters * per;
    let mut data = DMatrix::zeros(d, m);
    let mut truth = Vec::with_capacity(m);
    for k in 0..spec.clusters {
        let gaussian = DMatrix::from_fn(d, s, |_, _| rng.sample::<f64, _>(StandardNormal));
        let basis = gaussian.qr().q();
        for p in 0..per {
            let w = DVector::from_fn(s, |_, _| rng.sample::<f64, _>(StandardNormal));
            let noise = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let mut x = &basis * w + noise * spec.noise_sigma;
            let n = x.norm();
            if n > 0.0 {
                x /= n;
            }
            data.set_column(k * per + p, &x);
            truth.push(k as u32 + 1);
        }
    }
    Ok((FeatureMatrix::from_columns(data)?, truth))
}
