//! Builds a small synthetic scene, stores it in the cube container, reads it
//! back, extracts patch+PCA features for the labeled pixels, clusters them
//! and writes a cluster map next to the cube.
//!
//! cargo run --release --example cube_segmentation -- [out-dir]

use ddlssc::dataio::{read_cube, write_cube, HyperCube, LabelMap};
use ddlssc::numerics::rng_from_seed;
use ddlssc::pipeline::{prepare_features, run, truth_for, write_run_dir, PipelineConfig};
use rand::Rng;
use rand_distr::StandardNormal;

const H: usize = 24;
const W: usize = 24;
const BANDS: usize = 60;

fn main() -> ddlssc::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("ddlssc-cube"), Into::into);
    std::fs::create_dir_all(&out)?;
    let mut rng = rng_from_seed(11);

    // four quadrants, each a smooth spectral signature; a one-pixel frame of
    // unlabeled background
    let signatures: Vec<Vec<f64>> = (0..4)
        .map(|k| {
            let (f, p) = (1.0 + k as f64, k as f64 * 0.7);
            (0..BANDS).map(|b| 1.0 + 0.5 * (f * b as f64 / BANDS as f64 * 3.0 + p).sin()).collect()
        })
        .collect();
    let mut values = Vec::with_capacity(H * W * BANDS);
    let mut labels = Vec::with_capacity(H * W);
    for r in 0..H {
        for c in 0..W {
            let region = 2 * (r >= H / 2) as usize + (c >= W / 2) as usize;
            let border = r == 0 || c == 0 || r == H - 1 || c == W - 1;
            labels.push(if border { 0 } else { region as u32 + 1 });
            let gain = 1.0 + 0.1 * rng.sample::<f64, _>(StandardNormal);
            for &v in &signatures[region] {
                values.push(gain * v + 0.02 * rng.sample::<f64, _>(StandardNormal));
            }
        }
    }
    let header = out.join("scene.json");
    write_cube(&header, &HyperCube::new(H, W, BANDS, values)?, Some(&LabelMap::new(H, W, labels)?))?;

    let (cube, labels) = read_cube(&header)?;
    let labels = labels.expect("label payload");
    let cfg = PipelineConfig {
        depth: 2,
        max_outer_iters: 20,
        seed: 11,
        ..Default::default()
    };
    let x = prepare_features(&cube, Some(&labels), &cfg)?;
    println!("{} labeled pixels, {} features each", x.samples(), x.dim());
    let truth = truth_for(&x, &labels);
    let r = run(&x, Some(&truth), &cfg)?;
    let m = r.metrics.as_ref().expect("truth supplied");
    println!("oa {:.3} nmi {:.3} ari {:.3} kappa {:.3}", m.oa, m.nmi, m.ari, m.kappa);
    write_run_dir(&r, out.join("run"), Some((cube.height, cube.width)))?;
    println!("cube and run directory in {}", out.display());
    Ok(())
}
