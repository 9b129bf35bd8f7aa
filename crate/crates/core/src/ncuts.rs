//! Spectral segmentation of an affinity graph.
//!
//! Embeds vertices with the `k` smallest eigenvectors of
//! `L = I − D^{−1/2}·A·D^{−1/2}`, normalizes rows to unit length and runs
//! k-means on the rows. Vertices with zero degree get `d = 1`, so their
//! embedding row is zero and k-means still assigns them a label.

use nalgebra::DMatrix;

use crate::numerics::{eigh, kmeans, KMeansOptions, Which};
use crate::ssc::AffinityMatrix;
use crate::{Error, Result};

const EIGENGAP_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    /// One id in `0..k` per vertex.
    pub labels: Vec<usize>,
    pub k: usize,
    /// `m × k` row-normalized spectral coordinates.
    pub embedding: DMatrix<f64>,
    /// The `k` smallest Laplacian eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// Set when the graph does not determine a `k`-way split: some cluster is
    /// empty, or eigenvalues `k` and `k+1` coincide.
    pub degenerate: bool,
}

impl ClusterAssignment {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

/// `I − D^{−1/2}·A·D^{−1/2}` with the isolated-vertex degree floor.
pub fn normalized_laplacian(a: &AffinityMatrix) -> DMatrix<f64> {
    let m = a.size();
    let inv_sqrt: Vec<f64> = a
        .matrix
        .column_iter()
        .map(|c| {
            let d = c.sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let mut l = DMatrix::from_fn(m, m, |i, j| -a.matrix[(i, j)] * inv_sqrt[i] * inv_sqrt[j]);
    for i in 0..m {
        l[(i, i)] += 1.0;
    }
    // round-off in the products above can break exact symmetry
    let lt = l.transpose();
    (l + lt) * 0.5
}

pub fn normalized_cuts(a: &AffinityMatrix, k: usize, seed: u64) -> Result<ClusterAssignment> {
    let m = a.size();
    if k < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 clusters, got {k}")));
    }
    if k > m {
        return Err(Error::InvalidInput(format!("{k} clusters requested for {m} vertices")));
    }
    let lap = normalized_laplacian(a);
    let probe = (k + 1).min(m);
    let (values, vectors) = eigh(&lap, probe, Which::Smallest)?;
    let mut embedding = vectors.columns(0, k).into_owned();
    for mut row in embedding.row_iter_mut() {
        let n = row.norm();
        if n > 0.0 {
            row /= n;
        }
    }
    let fit = kmeans(&embedding, &KMeansOptions::new(k, seed))?;
    let mut degenerate = probe > k && values[k] - values[k - 1] <= EIGENGAP_FLOOR;
    let mut seen = vec![false; k];
    for &l in &fit.labels {
        seen[l] = true;
    }
    if seen.iter().any(|s| !s) {
        degenerate = true;
    }
    if degenerate {
        log::warn!("graph does not determine a {k}-way partition; assignment flagged degenerate");
    }
    Ok(ClusterAssignment {
        labels: fit.labels,
        k,
        embedding,
        eigenvalues: values.iter().take(k).copied().collect(),
        degenerate,
    })
}

/// `Σ_c cut(S_c, V∖S_c) / vol(S_c)`; empty or zero-volume parts contribute 0.
pub fn ncut_value(a: &AffinityMatrix, labels: &[usize], k: usize) -> f64 {
    let m = a.size();
    let mut cut = vec![0.0; k];
    let mut vol = vec![0.0; k];
    for i in 0..m {
        for j in 0..m {
            let w = a.matrix[(i, j)];
            vol[labels[i]] += w;
            if labels[i] != labels[j] {
                cut[labels[i]] += w;
            }
        }
    }
    cut.iter()
        .zip(&vol)
        .map(|(&c, &v)| if v > 0.0 { c / v } else { 0.0 })
        .sum()
}

/// Canonical form of a partition: labels renumbered by first appearance.
pub fn canonical_partition(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect()
}
