//! Spatio-spectral features: a `w × w` window around each pixel, all bands,
//! vectorized into one column, then reduced by PCA.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dataio::{HyperCube, LabelMap};
use crate::numerics::{eigh, Which};
use crate::{Error, Result};

/// One column per retained pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    /// `dim × samples`.
    pub data: DMatrix<f64>,
    /// `(row, col)` image coordinate of each column.
    pub pixel_index: Vec<(usize, usize)>,
}

impl FeatureMatrix {
    pub fn new(data: DMatrix<f64>, pixel_index: Vec<(usize, usize)>) -> Result<Self> {
        if pixel_index.len() != data.ncols() {
            return Err(Error::InvalidInput(format!(
                "{} pixel indices for {} columns",
                pixel_index.len(),
                data.ncols()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("feature matrix has non-finite entries".into()));
        }
        Ok(Self { data, pixel_index })
    }

    /// Columns with synthetic coordinates `(0, j)`, for data with no image geometry.
    pub fn from_columns(data: DMatrix<f64>) -> Result<Self> {
        let idx = (0..data.ncols()).map(|j| (0, j)).collect();
        Self::new(data, idx)
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn samples(&self) -> usize {
        self.data.ncols()
    }

    /// Scales every nonzero column to unit ℓ2 norm.
    pub fn normalize_columns(&mut self) {
        for mut col in self.data.column_iter_mut() {
            let n = col.norm();
            if n > 0.0 {
                col /= n;
            }
        }
    }
}

/// Principal directions fitted by [`pca_fit_transform`].
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: DVector<f64>,
    /// `d_raw × d`, orthonormal columns.
    pub basis: DMatrix<f64>,
    /// Retained eigenvalues of the centered scatter matrix `Xc·Xcᵀ`, descending.
    pub explained: DVector<f64>,
}

impl PcaModel {
    pub fn transform(&self, raw: &DMatrix<f64>) -> DMatrix<f64> {
        let mut centered = raw.clone();
        for mut col in centered.column_iter_mut() {
            col -= &self.mean;
        }
        self.basis.transpose() * centered
    }

    pub fn inverse_transform(&self, projected: &DMatrix<f64>) -> DMatrix<f64> {
        let mut back = &self.basis * projected;
        for mut col in back.column_iter_mut() {
            col += &self.mean;
        }
        back
    }
}

/// Reflects an out-of-range coordinate back into `0..len` without repeating the edge.
fn mirror(i: isize, len: usize) -> usize {
    let len = len as isize;
    let mut i = i;
    if i < 0 {
        i = -i;
    }
    if i >= len {
        i = 2 * (len - 1) - i;
    }
    i as usize
}

/// Vectorized `w × w × B` neighborhoods, one column per retained pixel.
///
/// Layout within a column: index `((dr·w) + dc)·B + b` for window row `dr`,
/// window column `dc`, band `b`. Pixels outside the image are mirrored
/// (`-1 → 1`). With a mask only pixels whose label is nonzero are kept; columns
/// follow row-major pixel order either way.
pub fn extract_patches(cube: &HyperCube, window: usize, mask: Option<&LabelMap>) -> Result<FeatureMatrix> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!("window must be odd and >= 1, got {window}")));
    }
    let (h, w, bands) = (cube.height, cube.width, cube.bands);
    if window > 2 * h.min(w) - 1 {
        return Err(Error::InvalidInput(format!(
            "window {window} too large for a {h}×{w} image (max {})",
            2 * h.min(w) - 1
        )));
    }
    if let Some(m) = mask {
        if (m.height, m.width) != (h, w) {
            return Err(Error::InvalidInput("mask dimensions differ from the cube".into()));
        }
    }
    let pixels: Vec<(usize, usize)> = (0..h)
        .flat_map(|r| (0..w).map(move |c| (r, c)))
        .filter(|&(r, c)| mask.is_none_or(|m| m.get(r, c) != 0))
        .collect();
    let half = (window / 2) as isize;
    let dim = window * window * bands;

    let columns: Vec<Vec<f64>> = pixels
        .par_iter()
        .map(|&(r, c)| {
            let mut v = Vec::with_capacity(dim);
            for dr in -half..=half {
                let rr = mirror(r as isize + dr, h);
                for dc in -half..=half {
                    let cc = mirror(c as isize + dc, w);
                    v.extend_from_slice(cube.spectrum(rr, cc));
                }
            }
            v
        })
        .collect();

    let mut data = DMatrix::zeros(dim, pixels.len());
    for (j, col) in columns.iter().enumerate() {
        data.column_mut(j).copy_from_slice(col);
    }
    FeatureMatrix::new(data, pixels)
}

/// Number of components kept for a fraction of `d_raw`: `⌈fraction · d_raw⌉`.
pub fn components_for(fraction: f64, d_raw: usize) -> usize {
    // guard against 0.1 * 1800 = 180.00000000000003
    let exact = fraction * d_raw as f64;
    let rounded = exact.round();
    let d = if (exact - rounded).abs() < 1e-9 { rounded } else { exact.ceil() };
    (d as usize).clamp(1, d_raw)
}

/// PCA keeping `⌈keep_fraction · d_raw⌉` directions.
///
/// Decomposes the `d_raw × d_raw` scatter matrix when `d_raw ≤ m`, otherwise
/// the `m × m` Gram matrix. Each direction's largest-magnitude entry is
/// positive.
pub fn pca_fit_transform(raw: &FeatureMatrix, keep_fraction: f64) -> Result<(FeatureMatrix, PcaModel)> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::InvalidInput(format!("keep_fraction {keep_fraction} outside (0, 1]")));
    }
    let (d_raw, m) = raw.data.shape();
    if m < 2 {
        return Err(Error::InvalidInput("PCA needs at least two samples".into()));
    }
    let d = components_for(keep_fraction, d_raw);
    let mean = raw.data.column_mean();
    let mut centered = raw.data.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let total = centered.norm_squared();
    if total <= f64::EPSILON * raw.data.norm_squared().max(f64::MIN_POSITIVE) {
        return Err(Error::DegenerateData("all feature columns are identical".into()));
    }

    // (eigenvalue, direction) pairs, descending
    let mut pairs: Vec<(f64, DVector<f64>)> = if d_raw <= m {
        let scatter = &centered * centered.transpose();
        let (vals, vecs) = eigh(&scatter, d, Which::Largest)?;
        (0..d).rev().map(|i| (vals[i].max(0.0), vecs.column(i).into_owned())).collect()
    } else {
        let gram = centered.transpose() * &centered;
        let (vals, vecs) = eigh(&gram, d.min(m), Which::Largest)?;
        let tol = vals.max().max(0.0) * 1e-12;
        (0..vals.len())
            .rev()
            .filter(|&i| vals[i] > tol)
            .map(|i| (vals[i], &centered * vecs.column(i) / vals[i].sqrt()))
            .collect()
    };
    if pairs.len() < d {
        pad_with_completions(&mut pairs, d_raw, d);
    }
    for (_, dir) in pairs.iter_mut() {
        let pivot = dir.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            dir.neg_mut();
        }
    }
    let explained = DVector::from_iterator(d, pairs.iter().map(|p| p.0));
    let basis = DMatrix::from_columns(&pairs.iter().map(|p| p.1.clone()).collect::<Vec<_>>());

    let model = PcaModel { mean, basis, explained };
    let projected = model.basis.transpose() * centered;
    Ok((FeatureMatrix::new(projected, raw.pixel_index.clone())?, model))
}

/// Fills zero-variance slots with Gram–Schmidt completions from the standard basis.
fn pad_with_completions(pairs: &mut Vec<(f64, DVector<f64>)>, d_raw: usize, d: usize) {
    for e in 0..d_raw {
        if pairs.len() >= d {
            break;
        }
        let mut v = DVector::zeros(d_raw);
        v[e] = 1.0;
        for (_, u) in pairs.iter() {
            let proj = u.dot(&v);
            v -= u * proj;
        }
        let n = v.norm();
        if n > 1e-8 {
            pairs.push((0.0, v / n));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn ramp_cube(h: usize, w: usize, b: usize) -> HyperCube {
        let values = (0..h * w * b).map(|v| v as f64).collect();
        HyperCube::new(h, w, b, values).unwrap()
    }

    #[test]
    fn window_one_is_the_spectrum() {
        let cube = ramp_cube(3, 4, 5);
        let f = extract_patches(&cube, 1, None).unwrap();
        assert_eq!(f.dim(), 5);
        assert_eq!(f.samples(), 12);
        for (j, &(r, c)) in f.pixel_index.iter().enumerate() {
            assert_eq!(f.data.column(j).as_slice(), cube.spectrum(r, c));
        }
    }

    #[test]
    fn indian_pines_raw_dimension() {
        let cube = HyperCube::new(3, 3, 200, vec![0.5; 3 * 3 * 200]).unwrap();
        let f = extract_patches(&cube, 3, None).unwrap();
        assert_eq!(f.dim(), 1800);
        assert_eq!(components_for(0.10, 1800), 180);
    }

    #[test]
    fn corner_patch_is_mirror_padded() {
        let cube = ramp_cube(4, 4, 2);
        let f = extract_patches(&cube, 3, None).unwrap();
        let col = f.data.column(0);
        // window rows -1,0,1 -> 1,0,1 ; cols likewise
        let rows = [1usize, 0, 1];
        let cols = [1usize, 0, 1];
        let mut expect = Vec::new();
        for &r in &rows {
            for &c in &cols {
                let base = (r * 4 + c) * 2;
                expect.push(base as f64);
                expect.push(base as f64 + 1.0);
            }
        }
        assert_eq!(col.as_slice(), expect.as_slice());
    }

    #[test]
    fn mask_keeps_labeled_pixels_only() {
        let cube = ramp_cube(2, 2, 1);
        let mask = LabelMap::new(2, 2, vec![0, 3, 0, 1]).unwrap();
        let f = extract_patches(&cube, 1, Some(&mask)).unwrap();
        assert_eq!(f.pixel_index, vec![(0, 1), (1, 1)]);
    }

    #[test]
    fn oversize_and_even_windows_rejected() {
        let cube = ramp_cube(2, 3, 1);
        assert!(extract_patches(&cube, 5, None).is_err());
        assert!(extract_patches(&cube, 3, None).is_ok());
        assert!(extract_patches(&cube, 2, None).is_err());
    }

    fn random_features(d: usize, m: usize, seed: u64) -> FeatureMatrix {
        let mut rng = crate::numerics::rng_from_seed(seed);
        FeatureMatrix::from_columns(DMatrix::from_fn(d, m, |_, _| rng.sample(StandardNormal))).unwrap()
    }

    #[test]
    fn rank_one_data_first_component_captures_everything() {
        let dir = DVector::from_vec(vec![1.0, 2.0, -2.0]) / 3.0;
        let data = DMatrix::from_fn(3, 10, |i, j| dir[i] * (j as f64 - 4.5) + 7.0);
        let f = FeatureMatrix::from_columns(data.clone()).unwrap();
        let (proj, model) = pca_fit_transform(&f, 0.34).unwrap();
        assert_eq!(proj.dim(), 2);
        let one = PcaModel {
            mean: model.mean.clone(),
            basis: model.basis.columns(0, 1).into_owned(),
            explained: model.explained.rows(0, 1).into_owned(),
        };
        let back = one.inverse_transform(&one.transform(&data));
        assert!((back - data).norm() < 1e-10);
        assert!(model.explained[1].abs() < 1e-10);
    }

    #[test]
    fn discarded_eigenvalues_equal_reconstruction_error() {
        let f = random_features(8, 20, 3);
        let (_, full) = pca_fit_transform(&f, 1.0).unwrap();
        for d in 1..=8 {
            let (proj, model) = pca_fit_transform(&f, d as f64 / 8.0).unwrap();
            assert_eq!(proj.dim(), d);
            let err = (model.inverse_transform(&proj.data) - &f.data).norm_squared();
            let discarded: f64 = full.explained.iter().skip(d).sum();
            assert!((err - discarded).abs() < 1e-8 * (1.0 + err), "d={d}: {err} vs {discarded}");
        }
    }

    #[test]
    fn gram_route_matches_scatter_route() {
        // more raw dims than samples forces the Gram route
        let wide = random_features(30, 12, 8);
        let (proj, model) = pca_fit_transform(&wide, 0.2).unwrap();
        assert_eq!(proj.dim(), 6);
        let gram = model.basis.transpose() * &model.basis;
        assert!((gram - DMatrix::identity(6, 6)).norm() < 1e-8);
        let mut centered = wide.data.clone();
        for mut c in centered.column_iter_mut() {
            c -= &model.mean;
        }
        let scatter = &centered * centered.transpose();
        let (vals, _) = eigh(&scatter, 6, Which::Largest).unwrap();
        for i in 0..6 {
            assert!((model.explained[i] - vals[5 - i]).abs() < 1e-8 * vals[5]);
        }
    }

    #[test]
    fn gram_route_pads_rank_deficient_data() {
        let wide = random_features(10, 3, 2);
        let (proj, model) = pca_fit_transform(&wide, 0.5).unwrap();
        assert_eq!(proj.dim(), 5);
        let gram = model.basis.transpose() * &model.basis;
        assert!((gram - DMatrix::identity(5, 5)).norm() < 1e-8);
        assert!(model.explained.iter().skip(2).all(|&v| v == 0.0));
    }

    #[test]
    fn identical_columns_are_degenerate() {
        let f = FeatureMatrix::from_columns(DMatrix::from_element(4, 5, 2.0)).unwrap();
        assert!(matches!(pca_fit_transform(&f, 0.5), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn reconstruction_error_non_increasing_in_d() {
        let f = random_features(9, 25, 12);
        let mut prev = f64::INFINITY;
        for d in 1..=9 {
            let (proj, model) = pca_fit_transform(&f, d as f64 / 9.0).unwrap();
            let err = (model.inverse_transform(&proj.data) - &f.data).norm_squared();
            assert!(err <= prev + 1e-9);
            prev = err;
        }
    }
}
