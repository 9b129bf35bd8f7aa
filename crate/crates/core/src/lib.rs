//! Joint deep dictionary learning with a sparse-subspace-clustering loss,
//! for pixel-level segmentation of hyperspectral images.
//!
//! The data `X` (one column per pixel) is factored as `D_1·…·D_L·Z` while the
//! representation `Z` is simultaneously pushed to be self-expressive,
//! `Z ≈ Z·C` with a sparse, zero-diagonal code matrix `C`. The codes give an
//! affinity graph `|C| + |C|ᵀ` that is segmented with normalized cuts.
//!
//! Module map:
//!
//! * [`numerics`]: pseudoinverse, Sylvester solver, symmetric eigensolver, k-means.
//! * [`dataio`]: cube container, CSV matrices and label files, cluster maps, synthetic data.
//! * [`features`]: windowed spatio-spectral patches followed by PCA.
//! * [`ddl`]: the layered dictionary model and its alternating updates.
//! * [`ssc`]: lasso self-expression, code matrix, affinity.
//! * [`ncuts`]: spectral segmentation of the affinity graph.
//! * [`metrics`]: NMI, ARI, purity, entropy, and best-map OA/AA/Kappa.
//! * [`pipeline`]: the full joint loop, the piecemeal ablation, run outputs.
//! * [`cli`]: the command-line front end used by the `ddlssc` binary.

pub mod cli;
pub mod dataio;
pub mod ddl;
pub mod error;
pub mod features;
pub mod metrics;
pub mod ncuts;
pub mod numerics;
pub mod pipeline;
pub mod ssc;

pub use error::{Error, Result};
pub use nalgebra::{DMatrix, DVector};
