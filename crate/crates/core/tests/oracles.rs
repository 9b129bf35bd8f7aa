//! Library routines against the independent oracles in `common`.

mod common;

use common::*;
use ddlssc::metrics::{evaluate, nmi, NmiNorm};
use ddlssc::numerics::sylvester_solve;
use ddlssc::ssc::{lasso_solve, LassoOptions};
use ddlssc::DVector;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn lasso_matches_coordinate_descent() {
    let mut rng = seeded(9);
    for i in 0..20 {
        let (n, p) = (rng.random_range(4..12), rng.random_range(4..20));
        let lambda = [0.1, 1.0, 10.0][i % 3];
        let d = gaussian(n, p, &mut rng);
        let y = DVector::from_column_slice(gaussian(n, 1, &mut rng).as_slice());
        let ours = lasso_solve(
            &y,
            &d,
            &LassoOptions {
                lambda,
                tol: 1e-10,
                max_iter: 100_000,
            },
        )
        .unwrap();
        assert!(ours.converged);
        let oracle = coordinate_descent_lasso(&y, &d, lambda, 1e-11);
        let diff = lasso_objective(&y, &d, &ours.coef, lambda) - lasso_objective(&y, &d, &oracle, lambda);
        assert!(diff.abs() < 1e-7, "instance {i}: {diff:e}");
    }
}

#[test]
fn sylvester_matches_kronecker_solve() {
    let mut rng = seeded(10);
    for _ in 0..20 {
        let (n, m) = (rng.random_range(1..6), rng.random_range(1..8));
        let a = gaussian(n, n, &mut rng);
        let b = gaussian(m, m, &mut rng);
        let q = gaussian(n, m, &mut rng);
        let w = sylvester_solve(&a, &b, &q).unwrap();
        let oracle = kronecker_sylvester(&a, &b, &q).unwrap();
        assert!((&w - &oracle).norm() <= 1e-6 * oracle.norm());
    }
}

#[test]
fn accelerated_descent_oracle_finds_least_squares() {
    let mut rng = seeded(11);
    let a = gaussian(8, 3, &mut rng);
    let b = gaussian(8, 2, &mut rng);
    let f = |x: &ddlssc::DMatrix<f64>| (&a * x - &b).norm_squared();
    let g = |x: &ddlssc::DMatrix<f64>| a.transpose() * (&a * x - &b) * 2.0;
    let x = accelerated_descent(&ddlssc::DMatrix::zeros(3, 2), 2.0 * spectral_norm_sq(&a), f, g);
    let normal = (a.transpose() * &a).lu().solve(&(a.transpose() * &b)).unwrap();
    assert!((x - normal).norm() < 1e-8);
}

fn labeling(max_label: u32) -> impl Strategy<Value = (Vec<u32>, Vec<u32>)> {
    (2usize..40).prop_flat_map(move |n| {
        (
            prop::collection::vec(1..=max_label, n),
            prop::collection::vec(1..=max_label, n),
        )
    })
}

proptest! {
    #[test]
    fn metrics_ignore_cluster_names((pred, truth) in labeling(5), shift in 1u32..50) {
        let renamed: Vec<u32> = pred.iter().map(|&p| (p * 7 + shift) % 1000 + 1).collect();
        let a = evaluate(&pred, &truth, NmiNorm::Geometric).unwrap();
        let b = evaluate(&renamed, &truth, NmiNorm::Geometric).unwrap();
        prop_assert!((a.nmi - b.nmi).abs() < 1e-12);
        prop_assert!((a.ari - b.ari).abs() < 1e-12);
        prop_assert!((a.purity - b.purity).abs() < 1e-12);
        prop_assert!((a.entropy - b.entropy).abs() < 1e-12);
        prop_assert!((a.oa - b.oa).abs() < 1e-12);
    }

    #[test]
    fn nmi_is_symmetric_and_matches_definition((pred, truth) in labeling(4)) {
        let ab = nmi(&pred, &truth, NmiNorm::Geometric).unwrap();
        let ba = nmi(&truth, &pred, NmiNorm::Geometric).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((ab - nmi_reference(&pred, &truth)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab));
    }
}
