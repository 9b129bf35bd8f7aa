//! Fits a three-layer dictionary factorization with the closed-form block
//! updates and no self-expression term, printing the reconstruction error
//! after each sweep, then saves and reloads a checkpoint.
//!
//! cargo run --release --example dictionary_layers -- [checkpoint-dir]

use ddlssc::dataio::{synth_subspaces, SyntheticSpec};
use ddlssc::ddl::{self, LayerSchedule, ZMode};
use ddlssc::ssc::CodeMatrix;

fn main() -> ddlssc::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("ddlssc-checkpoint"), Into::into);
    let (x, _) = synth_subspaces(&SyntheticSpec {
        clusters: 4,
        subspace_dim: 3,
        ambient_dim: 40,
        points_per_cluster: 30,
        noise_sigma: 0.05,
        seed: 2,
    })?;
    let x = x.data;
    let schedule = LayerSchedule::halving(x.nrows(), 3)?;
    println!("atoms per layer: {:?}", schedule.atoms);
    let mut state = ddl::init_state(&x, &schedule, 0.0, 2)?;
    let none = CodeMatrix::zeros(x.ncols(), 1.0);
    println!("sweep  0: recon {:.6}", state.recon_error(&x));
    for sweep in 1..=10 {
        for layer in 0..state.depth() {
            state = ddl::update_dictionary(&state, &x, layer)?;
        }
        state = ddl::update_z(&state, &x, &none, ZMode::PaperExact, false)?;
        state.iteration = sweep;
        println!("sweep {sweep:>2}: recon {:.6}", state.recon_error(&x));
    }
    ddl::save_checkpoint(&state, &dir)?;
    let back = ddl::load_checkpoint(&dir)?;
    println!(
        "checkpoint in {}: reloaded recon {:.6}",
        dir.display(),
        back.recon_error(&x)
    );
    Ok(())
}
