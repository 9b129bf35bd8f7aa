//! Segments a hand-built graph of three loosely linked cliques with
//! normalized cuts and prints the spectrum and the Ncut value.
//!
//! cargo run --release --example ncuts_graph

use ddlssc::ncuts::{ncut_value, normalized_cuts};
use ddlssc::ssc::AffinityMatrix;
use ddlssc::DMatrix;

fn main() -> ddlssc::Result<()> {
    let sizes = [4, 5, 3];
    let block: Vec<usize> = sizes.iter().enumerate().flat_map(|(b, &s)| std::iter::repeat_n(b, s)).collect();
    let m = block.len();
    let w = DMatrix::from_fn(m, m, |i, j| match (i == j, block[i] == block[j]) {
        (true, _) => 0.0,
        (false, true) => 1.0,
        (false, false) => 0.02,
    });
    let a = AffinityMatrix::new(w)?;
    let result = normalized_cuts(&a, 3, 0)?;
    println!("labels      {:?}", result.labels);
    println!("blocks      {block:?}");
    println!("eigenvalues {:.4?}", result.eigenvalues.as_slice());
    println!("sizes {:?}, degenerate {}", result.cluster_sizes(), result.degenerate);
    println!(
        "ncut {:.4} (planted {:.4})",
        ncut_value(&a, &result.labels, 3),
        ncut_value(&a, &block, 3)
    );
    Ok(())
}
