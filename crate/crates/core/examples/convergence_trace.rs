//! Runs the joint loop and prints the objective terms and the code-matrix
//! change per outer iteration, then writes a run directory.
//!
//! cargo run --release --example convergence_trace -- [depth] [out-dir]

use ddlssc::dataio::{synth_subspaces, SyntheticSpec};
use ddlssc::pipeline::{run_joint, write_run_dir, PipelineConfig};

fn main() -> ddlssc::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let depth = args.first().map_or(1, |s| s.parse().expect("depth"));
    let out = args
        .get(1)
        .map_or_else(|| std::env::temp_dir().join("ddlssc-trace"), Into::into);
    let (x, truth) = synth_subspaces(&SyntheticSpec {
        clusters: 5,
        subspace_dim: 4,
        ambient_dim: 30,
        points_per_cluster: 50,
        noise_sigma: 0.01,
        seed: 1,
    })?;
    let cfg = PipelineConfig {
        depth,
        seed: 1,
        ..Default::default()
    };
    let r = run_joint(&x, Some(&truth), &cfg)?;
    println!("{:>4} {:>12} {:>12} {:>12} {:>12} {:>10}", "iter", "recon", "ssc", "l1", "total", "delta_C");
    for t in &r.trace {
        let o = &t.objective;
        println!(
            "{:>4} {:>12.5e} {:>12.5e} {:>12.5e} {:>12.5e} {:>10.3e}",
            t.iter, o.recon, o.ssc, o.l1, o.total, t.delta_c
        );
    }
    let m = r.metrics.as_ref().expect("truth supplied");
    println!("stop: {:?}, oa {:.3}, nmi {:.3}", r.stop_reason, m.oa, m.nmi);
    write_run_dir(&r, &out, None)?;
    println!("run directory: {}", out.display());
    Ok(())
}
