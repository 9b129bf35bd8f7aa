//! Solves `A·W + W·B = Q` for a Gram-matrix `A`, as in the representation
//! update, and for a general `A`, then reports the residuals.
//!
//! cargo run --release --example sylvester

use ddlssc::numerics::{rng_from_seed, sylvester_solve};
use ddlssc::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

fn main() -> ddlssc::Result<()> {
    let mut rng = rng_from_seed(5);
    let mut gaussian = |r, c| DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal));
    let d = gaussian(12, 4);
    let gram = d.transpose() * &d;
    let general = gaussian(4, 4);
    let b = DMatrix::identity(30, 30) - gaussian(30, 30) * 0.05;
    let q = gaussian(4, 30);
    for (name, a) in [("symmetric A", gram), ("general A", general)] {
        let w = sylvester_solve(&a, &b, &q)?;
        let residual = (&a * &w + &w * &b - &q).norm() / q.norm();
        println!("{name:>12}: |W| = {:.4}, relative residual {residual:.2e}", w.norm());
    }

    // A and -B share the eigenvalue 1: no unique solution
    let a = DMatrix::from_diagonal_element(2, 2, 1.0);
    let b = DMatrix::from_diagonal_element(3, 3, -1.0);
    match sylvester_solve(&a, &b, &DMatrix::from_element(2, 3, 1.0)) {
        Ok(_) => println!("unexpected solution"),
        Err(e) => println!("overlapping spectra: {e}"),
    }
    Ok(())
}
