//! Scores a prediction label CSV against a truth label CSV (`row,col,label`,
//! truth label 0 = unlabeled). Without arguments a small built-in example is
//! scored instead.
//!
//! cargo run --release --example metrics_report -- [pred.csv truth.csv]

use std::collections::HashMap;

use ddlssc::dataio::read_label_csv;
use ddlssc::metrics::{evaluate, NmiNorm};

fn main() -> ddlssc::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (pred, truth): (Vec<u32>, Vec<u32>) = if let [p, t] = args.as_slice() {
        let truth: HashMap<_, _> = read_label_csv(t)?.into_iter().map(|e| ((e.row, e.col), e.label)).collect();
        read_label_csv(p)?
            .into_iter()
            .map(|e| (e.label, truth.get(&(e.row, e.col)).copied().unwrap_or(0)))
            .unzip()
    } else {
        (
            vec![3, 3, 3, 3, 1, 1, 1, 2, 2, 2, 2, 7],
            vec![1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3, 0],
        )
    };
    for norm in [NmiNorm::Geometric, NmiNorm::Arithmetic] {
        let r = evaluate(&pred, &truth, norm)?;
        println!(
            "{norm:?}: nmi {:.4} ari {:.4} purity {:.4} entropy {:.4} oa {:.4} aa {:.4} kappa {:.4}",
            r.nmi, r.ari, r.purity, r.entropy, r.oa, r.aa, r.kappa
        );
    }
    for m in evaluate(&pred, &truth, NmiNorm::Geometric)?.mapping {
        match m.truth {
            Some(t) => println!("  cluster {} -> class {t}", m.pred),
            None => println!("  cluster {} -> unmatched", m.pred),
        }
    }
    Ok(())
}
