//! Input and output: the cube container, CSV matrices and label files,
//! cluster maps, objective traces, and synthetic union-of-subspaces data.
//!
//! All readers reject malformed payloads instead of truncating them.

mod cube;
mod maps;
mod synth;
mod tables;

pub use cube::{read_cube, write_cube, CubeHeader};
pub use maps::{write_cluster_map, write_sparse_cluster_map};
pub use synth::{synth_subspaces, SyntheticSpec};
pub use tables::{
    read_feature_csv, read_label_csv, read_matrix_csv, write_code_triplets, write_feature_csv,
    write_label_csv, write_matrix_csv, write_trace_csv, LabelEntry,
};

use crate::{Error, Result};

/// `height × width × bands` image, band-interleaved by pixel, pixels row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperCube {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub values: Vec<f64>,
}

impl HyperCube {
    pub fn new(height: usize, width: usize, bands: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || bands == 0 {
            return Err(Error::InvalidInput("cube dimensions must be positive".into()));
        }
        if values.len() != height * width * bands {
            return Err(Error::InvalidInput(format!(
                "cube {height}×{width}×{bands} needs {} values, got {}",
                height * width * bands,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("cube has non-finite values".into()));
        }
        Ok(Self {
            height,
            width,
            bands,
            values,
        })
    }

    pub fn spectrum(&self, row: usize, col: usize) -> &[f64] {
        let start = (row * self.width + col) * self.bands;
        &self.values[start..start + self.bands]
    }
}

/// Per-pixel ground truth; `0` marks unlabeled pixels, classes are `1..=K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    pub height: usize,
    pub width: usize,
    pub labels: Vec<u32>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != height * width {
            return Err(Error::InvalidInput(format!(
                "label map {height}×{width} needs {} labels, got {}",
                height * width,
                labels.len()
            )));
        }
        Ok(Self {
            height,
            width,
            labels,
        })
    }

    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.labels[row * self.width + col]
    }

    /// Number of distinct nonzero classes.
    pub fn class_count(&self) -> usize {
        let mut seen: Vec<u32> = self.labels.iter().copied().filter(|&l| l != 0).collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }
}
