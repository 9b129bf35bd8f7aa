//! Independent reference implementations used by the integration and
//! acceptance tests. Each one follows the textbook definition directly and
//! shares no code with the library routine it checks.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use ddlssc::numerics::rng_from_seed;
use ddlssc::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    rng_from_seed(seed)
}

pub fn lasso_objective(y: &DVector<f64>, d: &DMatrix<f64>, c: &DVector<f64>, lambda: f64) -> f64 {
    (y - d * c).norm_squared() + lambda * c.lp_norm(1)
}

/// Cyclic coordinate descent for `‖y − Dc‖² + λ‖c‖₁`, iterated until no
/// coordinate moves by more than `tol`.
pub fn coordinate_descent_lasso(y: &DVector<f64>, d: &DMatrix<f64>, lambda: f64, tol: f64) -> DVector<f64> {
    let p = d.ncols();
    let mut c = DVector::<f64>::zeros(p);
    let mut r = y.clone();
    let norms: Vec<f64> = (0..p).map(|j| d.column(j).norm_squared()).collect();
    for _ in 0..1_000_000 {
        let mut max_step = 0.0f64;
        for j in 0..p {
            if norms[j] == 0.0 {
                continue;
            }
            let old = c[j];
            let rho: f64 = d.column(j).dot(&r) + norms[j] * old;
            let new = rho.signum() * (rho.abs() - lambda / 2.0).max(0.0) / norms[j];
            if new != old {
                r.axpy(old - new, &d.column(j), 1.0);
                c[j] = new;
                max_step = max_step.max((new - old).abs());
            }
        }
        if max_step < tol {
            break;
        }
    }
    c
}

/// Solves `A·W + W·B = Q` through `(I ⊗ A + Bᵀ ⊗ I)·vec(W) = vec(Q)`.
pub fn kronecker_sylvester(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let (n, m) = q.shape();
    let mut big = DMatrix::zeros(n * m, n * m);
    for j in 0..m {
        for i in 0..n {
            let row = j * n + i;
            for k in 0..n {
                big[(row, j * n + k)] += a[(i, k)];
            }
            for l in 0..m {
                big[(row, l * n + i)] += b[(l, j)];
            }
        }
    }
    let rhs = DVector::from_column_slice(q.as_slice());
    let w = big.lu().solve(&rhs)?;
    Some(DMatrix::from_column_slice(n, m, w.as_slice()))
}

/// Nesterov-accelerated gradient descent with restart on a smooth convex
/// function, run until the gradient is negligible or the objective stops
/// moving.
pub fn accelerated_descent(
    start: &DMatrix<f64>,
    lipschitz: f64,
    f: impl Fn(&DMatrix<f64>) -> f64,
    grad: impl Fn(&DMatrix<f64>) -> DMatrix<f64>,
) -> DMatrix<f64> {
    let step = 1.0 / lipschitz;
    let mut x = start.clone();
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut fx = f(&x);
    let g0 = grad(&x).norm().max(1e-300);
    let mut checkpoint = fx;
    for it in 1..2_000_000 {
        if it % 20_000 == 0 {
            if checkpoint - fx <= 1e-15 * (1.0 + fx.abs()) {
                break;
            }
            checkpoint = fx;
        }
        let g = grad(&y);
        let next = &y - g * step;
        let f_next = f(&next);
        if f_next > fx {
            y = x.clone();
            t = 1.0;
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &next + (&next - &x) * ((t - 1.0) / t_next);
        t = t_next;
        x = next;
        fx = f_next;
        if grad(&x).norm() <= 1e-12 * (1.0 + g0) {
            break;
        }
    }
    x
}

pub fn spectral_norm_sq(m: &DMatrix<f64>) -> f64 {
    let g = m.transpose() * m;
    g.symmetric_eigenvalues().max().max(0.0)
}

fn entropy_nat(counts: &BTreeMap<u32, usize>, n: f64) -> f64 {
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

fn tally(xs: &[u32]) -> BTreeMap<u32, usize> {
    let mut m = BTreeMap::new();
    for &x in xs {
        *m.entry(x).or_insert(0) += 1;
    }
    m
}

/// NMI with the geometric-mean normalization, straight from the definition.
pub fn nmi_reference(pred: &[u32], truth: &[u32]) -> f64 {
    let n = pred.len() as f64;
    let (tp, tt) = (tally(pred), tally(truth));
    let hp = entropy_nat(&tp, n);
    let ht = entropy_nat(&tt, n);
    if hp == 0.0 || ht == 0.0 {
        return 0.0;
    }
    let mut mi = 0.0;
    for (&a, &na) in &tp {
        for (&b, &nb) in &tt {
            let nab = pred.iter().zip(truth).filter(|&(&p, &t)| p == a && t == b).count();
            if nab > 0 {
                let pab = nab as f64 / n;
                mi += pab * (pab / ((na as f64 / n) * (nb as f64 / n))).ln();
            }
        }
    }
    mi / (hp * ht).sqrt()
}

/// ARI from pair counting over all unordered pairs.
pub fn ari_reference(pred: &[u32], truth: &[u32]) -> f64 {
    let n = pred.len();
    let (mut both, mut only_pred, mut only_truth, mut total) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let sp = pred[i] == pred[j];
            let st = truth[i] == truth[j];
            total += 1.0;
            match (sp, st) {
                (true, true) => both += 1.0,
                (true, false) => only_pred += 1.0,
                (false, true) => only_truth += 1.0,
                _ => {}
            }
        }
    }
    let same_pred = both + only_pred;
    let same_truth = both + only_truth;
    let expected = if total > 0.0 { same_pred * same_truth / total } else { 0.0 };
    let max = 0.5 * (same_pred + same_truth);
    if max == expected {
        let identical = (0..n).all(|i| (0..n).all(|j| (pred[i] == pred[j]) == (truth[i] == truth[j])));
        return if identical { 1.0 } else { 0.0 };
    }
    (both - expected) / (max - expected)
}

/// `(purity, normalized entropy)` by looping over predicted clusters.
pub fn purity_entropy_reference(pred: &[u32], truth: &[u32]) -> (f64, f64) {
    let n = pred.len() as f64;
    let classes: BTreeSet<u32> = truth.iter().copied().collect();
    let mut majority = 0usize;
    let mut h = 0.0;
    for (&cluster, &size) in &tally(pred) {
        let members: Vec<u32> = pred.iter().zip(truth).filter(|&(&p, _)| p == cluster).map(|(_, &t)| t).collect();
        let counts = tally(&members);
        majority += counts.values().max().copied().unwrap_or(0);
        let within: f64 = counts
            .values()
            .map(|&c| {
                let p = c as f64 / size as f64;
                -p * p.log2()
            })
            .sum();
        h += size as f64 / n * within;
    }
    let entropy = if classes.len() < 2 { 0.0 } else { h / (classes.len() as f64).log2() };
    (majority as f64 / n, entropy)
}

/// Largest number of agreeing entries over all one-to-one maps from
/// predicted clusters to classes (unmatched clusters score nothing).
pub fn best_agreement_reference(pred: &[u32], truth: &[u32]) -> usize {
    let clusters: Vec<u32> = tally(pred).into_keys().collect();
    let classes: Vec<u32> = tally(truth).into_keys().collect();
    fn search(i: usize, clusters: &[u32], classes: &[u32], used: &mut Vec<bool>, pred: &[u32], truth: &[u32]) -> usize {
        if i == clusters.len() {
            return 0;
        }
        // leave cluster i unmatched
        let mut best = search(i + 1, clusters, classes, used, pred, truth);
        for (k, &class) in classes.iter().enumerate() {
            if used[k] {
                continue;
            }
            used[k] = true;
            let hits = pred.iter().zip(truth).filter(|&(&p, &t)| p == clusters[i] && t == class).count();
            best = best.max(hits + search(i + 1, clusters, classes, used, pred, truth));
            used[k] = false;
        }
        best
    }
    search(0, &clusters, &classes, &mut vec![false; classes.len()], pred, truth)
}

/// Normalized-cut value of a labeling, from its definition.
pub fn ncut_reference(w: &DMatrix<f64>, labels: &[usize]) -> f64 {
    let groups: BTreeSet<usize> = labels.iter().copied().collect();
    let m = w.nrows();
    groups
        .iter()
        .map(|&g| {
            let (mut cut, mut vol) = (0.0, 0.0);
            for i in (0..m).filter(|&i| labels[i] == g) {
                for j in 0..m {
                    vol += w[(i, j)];
                    if labels[j] != g {
                        cut += w[(i, j)];
                    }
                }
            }
            if vol > 0.0 {
                cut / vol
            } else {
                0.0
            }
        })
        .sum()
}

/// The two-sided split of `0..m` with the smallest normalized cut.
pub fn min_ncut_bipartition(w: &DMatrix<f64>) -> Vec<usize> {
    let m = w.nrows();
    let mut best = (f64::INFINITY, vec![]);
    for mask in 1u64..(1u64 << (m - 1)) {
        let labels: Vec<usize> = (0..m).map(|i| ((mask >> i) & 1) as usize).collect();
        let v = ncut_reference(w, &labels);
        if v < best.0 {
            best = (v, labels);
        }
    }
    best.1
}

/// True when the two labelings induce the same partition.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    a.len() == b.len() && (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}

/// Two dense blocks of four nodes joined by weak random links.
pub fn two_block_graph(seed: u64) -> DMatrix<f64> {
    let mut rng = seeded(seed);
    let mut w = DMatrix::zeros(8, 8);
    for i in 0..8 {
        for j in (i + 1)..8 {
            let v = if (i < 4) == (j < 4) {
                rng.random_range(0.5..1.5)
            } else {
                rng.random_range(0.0..0.1)
            };
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    w
}
