use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{ensure_finite, rng_from_seed};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansOptions {
    pub clusters: usize,
    pub seed: u64,
    pub restarts: usize,
    pub max_iter: usize,
}

impl KMeansOptions {
    pub fn new(clusters: usize, seed: u64) -> Self {
        Self {
            clusters,
            seed,
            restarts: 10,
            max_iter: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    /// `clusters × dim`, one centroid per row.
    pub centroids: DMatrix<f64>,
    /// Within-cluster sum of squared distances.
    pub wcss: f64,
    /// Index of the winning restart.
    pub restart: usize,
}

/// Lloyd's k-means with k-means++ seeding over the rows of `points`.
///
/// Restart `r` draws from ChaCha stream `r` of `seed`, so results are
/// independent of how restarts are scheduled across threads. The restart
/// with the smallest WCSS wins; ties go to the lowest restart index.
pub fn kmeans(points: &DMatrix<f64>, opts: &KMeansOptions) -> Result<KMeansResult> {
    ensure_finite(points, "k-means points")?;
    let n = points.nrows();
    if opts.clusters == 0 || opts.clusters > n {
        return Err(Error::InvalidInput(format!(
            "k-means: {} clusters requested for {n} points",
            opts.clusters
        )));
    }
    if opts.restarts == 0 {
        return Err(Error::InvalidInput("k-means: restarts must be >= 1".into()));
    }
    let runs: Vec<KMeansResult> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_from_seed(opts.seed);
            rng.set_stream(r as u64);
            single_run(points, opts.clusters, opts.max_iter, &mut rng, r)
        })
        .collect();
    Ok(runs
        .into_iter()
        .reduce(|best, cand| if cand.wcss < best.wcss { cand } else { best })
        .expect("restarts >= 1"))
}

fn sq_dist(points: &DMatrix<f64>, i: usize, centroids: &DMatrix<f64>, c: usize) -> f64 {
    points
        .row(i)
        .iter()
        .zip(centroids.row(c).iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

fn seed_plus_plus(points: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = points.nrows();
    let mut centroids = DMatrix::zeros(k, points.ncols());
    let first = rng.random_range(0..n);
    centroids.set_row(0, &points.row(first));
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(points, i, &centroids, 0)).collect();
    for c in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.set_row(c, &points.row(pick));
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_dist(points, i, &centroids, c));
        }
    }
    centroids
}

fn assign(points: &DMatrix<f64>, centroids: &DMatrix<f64>) -> Vec<usize> {
    (0..points.nrows())
        .map(|i| {
            let mut best = (0, f64::INFINITY);
            for c in 0..centroids.nrows() {
                let d = sq_dist(points, i, centroids, c);
                if d < best.1 {
                    best = (c, d);
                }
            }
            best.0
        })
        .collect()
}

/// Cluster means; an empty cluster takes over the point farthest from its
/// current centroid (which is relabelled in place).
fn update(points: &DMatrix<f64>, labels: &mut [usize], old: &DMatrix<f64>) -> DMatrix<f64> {
    let k = old.nrows();
    let dim = points.ncols();
    loop {
        let mut sums = DMatrix::zeros(k, dim);
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            let mut row = sums.row_mut(l);
            row += points.row(i);
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            for (c, &cnt) in counts.iter().enumerate() {
                let mut row = sums.row_mut(c);
                row /= cnt as f64;
            }
            return sums;
        };
        let mut far = (usize::MAX, -1.0);
        for (i, &l) in labels.iter().enumerate() {
            if counts[l] < 2 {
                continue;
            }
            let d = sq_dist(points, i, old, l);
            if d > far.1 {
                far = (i, d);
            }
        }
        labels[far.0] = empty;
    }
}

fn wcss(points: &DMatrix<f64>, labels: &[usize], centroids: &DMatrix<f64>) -> f64 {
    labels.iter().enumerate().map(|(i, &l)| sq_dist(points, i, centroids, l)).sum()
}

fn single_run(
    points: &DMatrix<f64>,
    k: usize,
    max_iter: usize,
    rng: &mut ChaCha8Rng,
    restart: usize,
) -> KMeansResult {
    let mut centroids = seed_plus_plus(points, k, rng);
    let mut labels = assign(points, &centroids);
    for _ in 0..max_iter {
        centroids = update(points, &mut labels, &centroids);
        let next = assign(points, &centroids);
        if next == labels {
            break;
        }
        labels = next;
    }
    let centroids = update(points, &mut labels, &centroids);
    let wcss = wcss(points, &labels, &centroids);
    KMeansResult {
        labels,
        centroids,
        wcss,
        restart,
    }
}
