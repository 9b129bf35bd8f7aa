//! Solves one self-expression lasso and prints the certificate that comes
//! with it: duality gap, KKT violation and support.
//!
//! cargo run --release --example lasso_fista -- [lambda]

use ddlssc::numerics::rng_from_seed;
use ddlssc::ssc::{lasso_solve, LassoOptions};
use ddlssc::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

fn main() -> ddlssc::Result<()> {
    let lambda: f64 = std::env::args().nth(1).map_or(0.05, |s| s.parse().expect("lambda"));
    let mut rng = rng_from_seed(3);
    let d = DMatrix::from_fn(20, 30, |_, _| rng.sample::<f64, _>(StandardNormal));
    // y is an exact combination of three atoms
    let mut truth = DVector::zeros(30);
    truth[2] = 1.5;
    truth[7] = -0.8;
    truth[15] = 0.6;
    let y = &d * &truth;

    let sol = lasso_solve(
        &y,
        &d,
        &LassoOptions {
            lambda,
            tol: 1e-10,
            max_iter: 50_000,
        },
    )?;
    println!("lambda {lambda}: objective {:.8}, gap {:.2e}, kkt {:.2e}", sol.objective, sol.gap, sol.kkt_violation);
    println!("{} iterations, converged: {}", sol.iterations, sol.converged);
    for (j, v) in sol.coef.iter().enumerate().filter(|(_, v)| v.abs() > 1e-9) {
        println!("  c[{j:>2}] = {v:+.5}   (generating weight {:+.2})", truth[j]);
    }
    Ok(())
}
