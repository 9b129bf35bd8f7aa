//! External clustering scores: NMI, ARI, purity, entropy, and OA/AA/Kappa
//! after a best-map relabeling.
//!
//! Entries whose ground truth is `0` are unlabeled and ignored everywhere.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Cross-tabulation of predicted clusters (rows) against true classes
/// (columns), over labeled entries only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    pub pred_ids: Vec<u32>,
    pub true_ids: Vec<u32>,
    /// `counts[i][j]` = entries in predicted cluster `pred_ids[i]` and class `true_ids[j]`.
    pub counts: Vec<Vec<u64>>,
    pub row_sums: Vec<u64>,
    pub col_sums: Vec<u64>,
    pub total: u64,
}

impl ContingencyTable {
    pub fn new(pred: &[u32], truth: &[u32]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::InvalidInput(format!(
                "prediction has {} entries, truth has {}",
                pred.len(),
                truth.len()
            )));
        }
        let pairs: Vec<(u32, u32)> = pred.iter().copied().zip(truth.iter().copied()).filter(|p| p.1 != 0).collect();
        if pairs.is_empty() {
            return Err(Error::InvalidInput("no labeled entries to evaluate".into()));
        }
        let index = |values: Vec<u32>| -> BTreeMap<u32, usize> {
            let mut ids: Vec<u32> = values;
            ids.sort_unstable();
            ids.dedup();
            ids.into_iter().enumerate().map(|(i, v)| (v, i)).collect()
        };
        let rows = index(pairs.iter().map(|p| p.0).collect());
        let cols = index(pairs.iter().map(|p| p.1).collect());
        let mut counts = vec![vec![0u64; cols.len()]; rows.len()];
        for (p, t) in &pairs {
            counts[rows[p]][cols[t]] += 1;
        }
        let row_sums = counts.iter().map(|r| r.iter().sum()).collect();
        let col_sums = (0..cols.len()).map(|j| counts.iter().map(|r| r[j]).sum()).collect();
        Ok(Self {
            pred_ids: rows.into_keys().collect(),
            true_ids: cols.into_keys().collect(),
            counts,
            row_sums,
            col_sums,
            total: pairs.len() as u64,
        })
    }

    fn entropy(sizes: &[u64], n: f64) -> f64 {
        sizes
            .iter()
            .filter(|&&s| s > 0)
            .map(|&s| {
                let p = s as f64 / n;
                -p * p.ln()
            })
            .sum()
    }

    fn mutual_information(&self) -> f64 {
        let n = self.total as f64;
        let mut mi = 0.0;
        for (i, row) in self.counts.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if c > 0 {
                    let c = c as f64;
                    mi += c / n * (c * n / (self.row_sums[i] as f64 * self.col_sums[j] as f64)).ln();
                }
            }
        }
        mi.max(0.0)
    }
}

/// How mutual information is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NmiNorm {
    /// `I / sqrt(H(pred)·H(truth))`
    #[default]
    Geometric,
    /// `I / ((H(pred) + H(truth)) / 2)`
    Arithmetic,
}

/// Predicted cluster `pred` mapped to class `truth`; `None` means the
/// cluster was left unmatched and counts as wrong everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapEntry {
    pub pred: u32,
    pub truth: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub nmi: f64,
    pub ari: f64,
    pub purity: f64,
    pub entropy: f64,
    pub oa: f64,
    pub aa: f64,
    pub kappa: f64,
    pub mapping: Vec<MapEntry>,
}

pub fn nmi(pred: &[u32], truth: &[u32], norm: NmiNorm) -> Result<f64> {
    Ok(nmi_from_table(&ContingencyTable::new(pred, truth)?, norm))
}

fn nmi_from_table(t: &ContingencyTable, norm: NmiNorm) -> f64 {
    let n = t.total as f64;
    let hp = ContingencyTable::entropy(&t.row_sums, n);
    let ht = ContingencyTable::entropy(&t.col_sums, n);
    if hp <= 0.0 || ht <= 0.0 {
        return 0.0;
    }
    let denom = match norm {
        NmiNorm::Geometric => (hp * ht).sqrt(),
        NmiNorm::Arithmetic => 0.5 * (hp + ht),
    };
    (t.mutual_information() / denom).clamp(0.0, 1.0)
}

fn pairs(n: u64) -> f64 {
    (n as f64) * (n as f64 - 1.0) / 2.0
}

pub fn ari(pred: &[u32], truth: &[u32]) -> Result<f64> {
    Ok(ari_from_table(&ContingencyTable::new(pred, truth)?))
}

/// One nonzero per row and per column: the partitions coincide.
fn identical_partitions(t: &ContingencyTable) -> bool {
    t.pred_ids.len() == t.true_ids.len() && t.counts.iter().all(|r| r.iter().filter(|&&c| c > 0).count() == 1)
}

fn ari_from_table(t: &ContingencyTable) -> f64 {
    let index: f64 = t.counts.iter().flatten().map(|&c| pairs(c)).sum();
    let a: f64 = t.row_sums.iter().map(|&c| pairs(c)).sum();
    let b: f64 = t.col_sums.iter().map(|&c| pairs(c)).sum();
    let all = pairs(t.total);
    let expected = if all > 0.0 { a * b / all } else { 0.0 };
    let denom = 0.5 * (a + b) - expected;
    if denom == 0.0 {
        return if identical_partitions(t) { 1.0 } else { 0.0 };
    }
    (index - expected) / denom
}

/// `(purity, entropy)`; entropy is the cluster-size-weighted class entropy
/// in bits, divided by `log2(number of classes)` (0 for a single class).
pub fn purity_entropy(pred: &[u32], truth: &[u32]) -> Result<(f64, f64)> {
    Ok(purity_entropy_from_table(&ContingencyTable::new(pred, truth)?))
}

fn purity_entropy_from_table(t: &ContingencyTable) -> (f64, f64) {
    let n = t.total as f64;
    let purity = t.counts.iter().map(|r| *r.iter().max().unwrap_or(&0) as f64).sum::<f64>() / n;
    let classes = t.true_ids.len();
    if classes < 2 {
        return (purity, 0.0);
    }
    let mut h = 0.0;
    for (row, &size) in t.counts.iter().zip(&t.row_sums) {
        let size = size as f64;
        let within: f64 = row
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / size;
                -p * p.log2()
            })
            .sum();
        h += size / n * within;
    }
    (purity, (h / (classes as f64).log2()).max(0.0))
}

/// Minimum-cost perfect assignment on a square matrix; `result[row] = col`.
fn hungarian(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    // 1-based potentials formulation; column 0 is a virtual start
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r0 = owner[col0];
            let mut delta = inf;
            let mut col1 = 0;
            for col in 1..=n {
                if !used[col] {
                    let cur = cost[r0 - 1][col - 1] - u[r0] - v[col];
                    if cur < minv[col] {
                        minv[col] = cur;
                        way[col] = col0;
                    }
                    if minv[col] < delta {
                        delta = minv[col];
                        col1 = col;
                    }
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    minv[col] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            owner[col0] = owner[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut result = vec![0; n];
    for col in 1..=n {
        if owner[col] > 0 {
            result[owner[col] - 1] = col - 1;
        }
    }
    result
}

/// One-to-one matching of predicted clusters to classes maximizing the
/// number of agreeing entries.
pub fn best_map(pred: &[u32], truth: &[u32]) -> Result<Vec<MapEntry>> {
    Ok(best_map_from_table(&ContingencyTable::new(pred, truth)?))
}

fn best_map_from_table(t: &ContingencyTable) -> Vec<MapEntry> {
    let size = t.pred_ids.len().max(t.true_ids.len());
    let cost: Vec<Vec<i64>> = (0..size)
        .map(|i| {
            (0..size)
                .map(|j| {
                    let c = t.counts.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0);
                    -(c as i64)
                })
                .collect()
        })
        .collect();
    let assignment = hungarian(&cost);
    t.pred_ids
        .iter()
        .enumerate()
        .map(|(i, &pred)| MapEntry {
            pred,
            truth: t.true_ids.get(assignment[i]).copied(),
        })
        .collect()
}

/// Overall accuracy, average per-class recall and Cohen's kappa of the
/// prediction relabeled through `mapping`.
pub fn oa_aa_kappa(pred: &[u32], truth: &[u32], mapping: &[MapEntry]) -> Result<(f64, f64, f64)> {
    let t = ContingencyTable::new(pred, truth)?;
    oa_aa_kappa_from_table(&t, mapping)
}

fn oa_aa_kappa_from_table(t: &ContingencyTable, mapping: &[MapEntry]) -> Result<(f64, f64, f64)> {
    let lookup: BTreeMap<u32, Option<u32>> = mapping.iter().map(|e| (e.pred, e.truth)).collect();
    let classes = t.true_ids.len();
    // mapped_sums[j]: entries whose relabeled prediction is class j
    let mut mapped_sums = vec![0u64; classes];
    let mut correct = vec![0u64; classes];
    for (i, &p) in t.pred_ids.iter().enumerate() {
        let target = *lookup
            .get(&p)
            .ok_or_else(|| Error::InvalidInput(format!("mapping has no entry for cluster {p}")))?;
        if let Some(j) = target.and_then(|c| t.true_ids.iter().position(|&x| x == c)) {
            mapped_sums[j] += t.row_sums[i];
            correct[j] += t.counts[i][j];
        }
    }
    let n = t.total as f64;
    let oa = correct.iter().sum::<u64>() as f64 / n;
    let aa = correct
        .iter()
        .zip(&t.col_sums)
        .map(|(&c, &s)| c as f64 / s as f64)
        .sum::<f64>()
        / classes as f64;
    let pe = mapped_sums
        .iter()
        .zip(&t.col_sums)
        .map(|(&a, &b)| a as f64 * b as f64)
        .sum::<f64>()
        / (n * n);
    let kappa = if (1.0 - pe).abs() < 1e-15 {
        if oa == 1.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (oa - pe) / (1.0 - pe)
    };
    Ok((oa, aa, kappa))
}

/// All seven scores.
pub fn evaluate(pred: &[u32], truth: &[u32], norm: NmiNorm) -> Result<MetricReport> {
    let t = ContingencyTable::new(pred, truth)?;
    let mapping = best_map_from_table(&t);
    let (purity, entropy) = purity_entropy_from_table(&t);
    let (oa, aa, kappa) = oa_aa_kappa_from_table(&t, &mapping)?;
    Ok(MetricReport {
        nmi: nmi_from_table(&t, norm),
        ari: ari_from_table(&t),
        purity,
        entropy,
        oa,
        aa,
        kappa,
        mapping,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng_from_seed;
    use rand::Rng;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn nmi_examples() {
        assert!(close(nmi(&[1, 1, 2, 2], &[1, 1, 2, 2], NmiNorm::Geometric).unwrap(), 1.0));
        assert_eq!(nmi(&[1, 1, 1, 1], &[1, 1, 2, 2], NmiNorm::Geometric).unwrap(), 0.0);

        // hand-built 2×2 table [[2,0],[1,2]]
        let n = 5.0f64;
        let h = |ps: &[f64]| -ps.iter().map(|p| p * p.ln()).sum::<f64>();
        let hp = h(&[2.0 / n, 3.0 / n]);
        let ht = h(&[3.0 / n, 2.0 / n]);
        let mi = 2.0 / n * ((2.0 / n) / (2.0 / n * 3.0 / n)).ln()
            + 1.0 / n * ((1.0 / n) / (3.0 / n * 3.0 / n)).ln()
            + 2.0 / n * ((2.0 / n) / (3.0 / n * 2.0 / n)).ln();
        let got = nmi(&[1, 1, 2, 2, 2], &[1, 1, 1, 2, 2], NmiNorm::Geometric).unwrap();
        assert!(close(got, mi / (hp * ht).sqrt()));
        let got = nmi(&[1, 1, 2, 2, 2], &[1, 1, 1, 2, 2], NmiNorm::Arithmetic).unwrap();
        assert!(close(got, mi / (0.5 * (hp + ht))));
    }

    #[test]
    fn ari_examples() {
        assert!(close(ari(&[3, 3, 1, 1], &[1, 1, 2, 2]).unwrap(), 1.0));
        assert!(close(ari(&[1, 1, 1, 1], &[1, 1, 2, 2]).unwrap(), 0.0));
        assert_eq!(ari(&[1, 2, 3], &[4, 5, 6]).unwrap(), 1.0);
        assert_eq!(ari(&[1], &[1]).unwrap(), 1.0);
    }

    #[test]
    fn purity_entropy_examples() {
        assert_eq!(purity_entropy(&[1, 2, 2, 2], &[1, 1, 2, 2]).unwrap().0, 0.75);
        let (p, e) = purity_entropy(&[1, 1, 2, 2], &[1, 1, 2, 2]).unwrap();
        assert_eq!((p, e), (1.0, 0.0));
        let (_, e) = purity_entropy(&[1, 1, 1, 1], &[1, 1, 2, 2]).unwrap();
        assert!(close(e, 1.0));
    }

    #[test]
    fn best_map_recovers_permutation() {
        let truth = [1, 1, 2, 2, 3, 3];
        let pred = [7, 7, 4, 4, 9, 9];
        let map = best_map(&pred, &truth).unwrap();
        assert_eq!(
            map,
            vec![
                MapEntry { pred: 4, truth: Some(2) },
                MapEntry { pred: 7, truth: Some(1) },
                MapEntry { pred: 9, truth: Some(3) },
            ]
        );
        assert_eq!(oa_aa_kappa(&pred, &truth, &map).unwrap(), (1.0, 1.0, 1.0));
    }

    #[test]
    fn surplus_clusters_get_sentinel() {
        let map = best_map(&[1, 2, 3, 3], &[1, 1, 2, 2]).unwrap();
        assert_eq!(map.iter().filter(|e| e.truth.is_none()).count(), 1);
        let (oa, _, _) = oa_aa_kappa(&[1, 2, 3, 3], &[1, 1, 2, 2], &map).unwrap();
        assert_eq!(oa, 0.75);
    }

    #[test]
    fn hungarian_matches_permutation_search() {
        let mut rng = rng_from_seed(3);
        let perms = permutations(4);
        for _ in 0..200 {
            let cost: Vec<Vec<i64>> = (0..4).map(|_| (0..4).map(|_| rng.random_range(-20..20)).collect()).collect();
            let got = hungarian(&cost);
            let got_cost: i64 = got.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
            let best = perms
                .iter()
                .map(|p| p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum::<i64>())
                .min()
                .unwrap();
            assert_eq!(got_cost, best);
            let mut seen = got.clone();
            seen.sort();
            assert_eq!(seen, vec![0, 1, 2, 3]);
        }
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn kappa_hand_case() {
        let truth = [1, 1, 1, 1, 2, 2, 2, 2];
        let pred = [1, 1, 1, 2, 2, 2, 2, 1];
        let map = best_map(&pred, &truth).unwrap();
        let (oa, aa, kappa) = oa_aa_kappa(&pred, &truth, &map).unwrap();
        assert!(close(oa, 0.75) && close(aa, 0.75) && close(kappa, 0.5));
    }

    #[test]
    fn random_predictions_have_near_zero_kappa() {
        let mut rng = rng_from_seed(11);
        let truth: Vec<u32> = (0..10_000).map(|_| rng.random_range(1..=4)).collect();
        let pred: Vec<u32> = (0..10_000).map(|_| rng.random_range(1..=4)).collect();
        let r = evaluate(&pred, &truth, NmiNorm::Geometric).unwrap();
        assert!(r.kappa.abs() < 0.05, "{}", r.kappa);
    }

    #[test]
    fn unlabeled_entries_are_ignored() {
        let base = evaluate(&[1, 2, 2, 1], &[1, 2, 2, 2], NmiNorm::Geometric).unwrap();
        let padded = evaluate(&[1, 9, 2, 2, 3, 1], &[1, 0, 2, 2, 0, 2], NmiNorm::Geometric).unwrap();
        assert_eq!(base, padded);
    }

    #[test]
    fn single_class_kappa() {
        let r = evaluate(&[5, 5, 5], &[2, 2, 2], NmiNorm::Geometric).unwrap();
        assert_eq!((r.oa, r.aa, r.kappa, r.entropy), (1.0, 1.0, 1.0, 0.0));
    }

    #[test]
    fn errors() {
        assert!(evaluate(&[1, 2], &[1], NmiNorm::Geometric).is_err());
        assert!(evaluate(&[1, 2], &[0, 0], NmiNorm::Geometric).is_err());
    }
}
