//! Layered dictionary model `X ≈ D_1·D_2·…·D_L·Z` and its alternating updates.
//!
//! Each dictionary step is the block least-squares minimizer
//! `D_l = P⁺·X·Q⁺`, with `P = D_1⋯D_{l−1}` and `Q = D_{l+1}⋯D_L·Z`. The
//! representation step solves a Sylvester equation that couples the
//! reconstruction with the self-expression penalty `μ‖Z − Z·C‖_F²`.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataio::{read_matrix_csv, write_matrix_csv};
use crate::numerics::{chain_product, ensure_finite, pinv_default, rng_from_seed, sylvester_solve};
use crate::ssc::CodeMatrix;
use crate::{Error, Result};

pub const MAX_DEPTH: usize = 4;

/// Atom counts per layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSchedule {
    pub input_dim: usize,
    pub atoms: Vec<usize>,
}

impl LayerSchedule {
    /// Halves the atom count at every layer, starting from the input dimension.
    pub fn halving(input_dim: usize, depth: usize) -> Result<Self> {
        if !(1..=MAX_DEPTH).contains(&depth) {
            return Err(Error::InvalidInput(format!("depth {depth} outside 1..={MAX_DEPTH}")));
        }
        let mut atoms = Vec::with_capacity(depth);
        let mut prev = input_dim;
        for _ in 0..depth {
            prev /= 2;
            atoms.push(prev);
        }
        if prev < 2 {
            return Err(Error::InvalidInput(format!(
                "input dimension {input_dim} too small for depth {depth} (last layer would have {prev} atoms)"
            )));
        }
        Ok(Self { input_dim, atoms })
    }

    /// Arbitrary atom counts, for experiments outside the halving rule.
    pub fn custom(input_dim: usize, atoms: Vec<usize>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() > MAX_DEPTH {
            return Err(Error::InvalidInput(format!("depth {} outside 1..={MAX_DEPTH}", atoms.len())));
        }
        if atoms.contains(&0) {
            return Err(Error::InvalidInput("every layer needs at least one atom".into()));
        }
        Ok(Self { input_dim, atoms })
    }

    pub fn depth(&self) -> usize {
        self.atoms.len()
    }

    /// `(rows, cols)` of dictionary `layer` (0-based).
    pub fn shape(&self, layer: usize) -> (usize, usize) {
        let rows = if layer == 0 { self.input_dim } else { self.atoms[layer - 1] };
        (rows, self.atoms[layer])
    }

    pub fn code_dim(&self) -> usize {
        *self.atoms.last().expect("non-empty schedule")
    }
}

/// Dictionaries and representation at one point of the alternating loop.
#[derive(Debug, Clone, PartialEq)]
pub struct DdlState {
    pub dictionaries: Vec<DMatrix<f64>>,
    /// `atoms[L−1] × m`.
    pub z: DMatrix<f64>,
    pub mu: f64,
    pub iteration: usize,
    pub seed: u64,
}

impl DdlState {
    pub fn depth(&self) -> usize {
        self.dictionaries.len()
    }

    /// `D̄ = D_1·…·D_L`.
    pub fn composed(&self) -> DMatrix<f64> {
        chain_product(&self.dictionaries).expect("at least one layer")
    }

    pub fn reconstruction(&self) -> DMatrix<f64> {
        self.composed() * &self.z
    }

    pub fn recon_error(&self, x: &DMatrix<f64>) -> f64 {
        (x - self.reconstruction()).norm_squared()
    }

    pub fn schedule(&self) -> LayerSchedule {
        LayerSchedule {
            input_dim: self.dictionaries[0].nrows(),
            atoms: self.dictionaries.iter().map(|d| d.ncols()).collect(),
        }
    }

    fn check_finite(&self) -> Result<()> {
        for (l, d) in self.dictionaries.iter().enumerate() {
            if d.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!("dictionary {} became non-finite", l + 1)));
            }
        }
        if self.z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("representation Z became non-finite".into()));
        }
        Ok(())
    }
}

/// Gaussian dictionaries with unit-norm columns, and `Z⁰ = D̄⁺·X`.
pub fn init_state(x: &DMatrix<f64>, schedule: &LayerSchedule, mu: f64, seed: u64) -> Result<DdlState> {
    ensure_finite(x, "data X")?;
    if x.nrows() != schedule.input_dim {
        return Err(Error::InvalidInput(format!(
            "schedule expects input dimension {}, X has {} rows",
            schedule.input_dim,
            x.nrows()
        )));
    }
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::InvalidInput(format!("mu must be finite and >= 0, got {mu}")));
    }
    let m = x.ncols();
    if schedule.code_dim() >= m {
        log::warn!(
            "representation has {} atoms for {m} samples; self-expression will be loose",
            schedule.code_dim()
        );
    }
    let mut rng = rng_from_seed(seed);
    let dictionaries: Vec<DMatrix<f64>> = (0..schedule.depth())
        .map(|l| {
            let (r, c) = schedule.shape(l);
            let mut d = DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal));
            for mut col in d.column_iter_mut() {
                let n = col.norm();
                if n > 0.0 {
                    col /= n;
                }
            }
            d
        })
        .collect();
    let composed = chain_product(&dictionaries).expect("depth >= 1");
    let z = pinv_default(&composed)? * x;
    let state = DdlState {
        dictionaries,
        z,
        mu,
        iteration: 0,
        seed,
    };
    state.check_finite()?;
    Ok(state)
}

/// Block least-squares update of dictionary `layer` (0-based).
pub fn update_dictionary(state: &DdlState, x: &DMatrix<f64>, layer: usize) -> Result<DdlState> {
    let depth = state.depth();
    if layer >= depth {
        return Err(Error::InvalidInput(format!("layer {layer} outside 0..{depth}")));
    }
    let right = {
        let mut q = state.z.clone();
        for d in state.dictionaries[layer + 1..].iter().rev() {
            q = d * q;
        }
        q
    };
    let mut updated = x * pinv_default(&right)?;
    if layer > 0 {
        let left = chain_product(&state.dictionaries[..layer]).expect("layer > 0");
        updated = pinv_default(&left)? * updated;
    }
    let mut next = state.clone();
    next.dictionaries[layer] = updated;
    next.check_finite()?;
    Ok(next)
}

/// Which Sylvester system the representation step solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZMode {
    /// `D̄ᵀD̄·Z + Z·μ(I − C) = D̄ᵀX`, the default.
    #[default]
    PaperExact,
    /// `D̄ᵀD̄·Z + Z·μ(I − C)(I − C)ᵀ = D̄ᵀX`, the exact stationarity condition.
    GradientExact,
}

/// Representation update against fixed dictionaries and codes.
///
/// `μ = 0` reduces to `Z = D̄⁺·X`. On a singular Sylvester system a ridge
/// `ε·I` with `ε = 1e-8·trace(A)/n` is added to `A` and the solve retried
/// once. With `nonneg_project` the result is clamped to `max(Z, 0)`.
pub fn update_z(
    state: &DdlState,
    x: &DMatrix<f64>,
    codes: &CodeMatrix,
    mode: ZMode,
    nonneg_project: bool,
) -> Result<DdlState> {
    let m = x.ncols();
    if codes.size() != m {
        return Err(Error::InvalidInput(format!("code matrix is {0}×{0}, expected {m}×{m}", codes.size())));
    }
    if codes.matrix.diagonal().iter().any(|&v| v != 0.0) {
        return Err(Error::InvalidInput("code matrix diagonal must be zero".into()));
    }
    let dbar = state.composed();
    let mut z = if state.mu == 0.0 {
        pinv_default(&dbar)? * x
    } else {
        let a = dbar.tr_mul(&dbar);
        let q = dbar.tr_mul(x);
        let i_minus_c = DMatrix::identity(m, m) - &codes.matrix;
        let b = match mode {
            ZMode::PaperExact => &i_minus_c * state.mu,
            ZMode::GradientExact => (&i_minus_c * i_minus_c.transpose()) * state.mu,
        };
        match sylvester_solve(&a, &b, &q) {
            Ok(z) => z,
            Err(Error::SingularSylvester { gap }) => {
                let n = a.nrows();
                let eps = 1e-8 * a.trace() / n as f64;
                log::warn!("singular Sylvester system (gap {gap:e}); retrying with ridge {eps:e}");
                let ridged = a + DMatrix::identity(n, n) * eps;
                sylvester_solve(&ridged, &b, &q)?
            }
            Err(e) => return Err(e),
        }
    };
    if nonneg_project {
        z.apply(|v| *v = v.max(0.0));
    }
    let mut next = state.clone();
    next.z = z;
    next.check_finite()?;
    Ok(next)
}

/// Terms of the joint objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    /// `‖X − D̄·Z‖_F²`
    pub recon: f64,
    /// `Σᵢ ‖zᵢ − Z·cᵢ‖₂²`
    pub ssc: f64,
    /// `Σᵢ ‖cᵢ‖₁`
    pub l1: f64,
    /// `recon + μ·ssc + λ·l1`
    pub total: f64,
}

pub fn objective(state: &DdlState, x: &DMatrix<f64>, codes: &CodeMatrix, lambda: f64) -> Result<ObjectiveBreakdown> {
    if codes.size() != state.z.ncols() || x.ncols() != state.z.ncols() {
        return Err(Error::InvalidInput("objective: inconsistent sample counts".into()));
    }
    let recon = state.recon_error(x);
    let ssc = (&state.z - &state.z * &codes.matrix).norm_squared();
    let l1 = codes.matrix.iter().map(|v| v.abs()).sum::<f64>();
    Ok(ObjectiveBreakdown {
        recon,
        ssc,
        l1,
        total: recon + state.mu * ssc + lambda * l1,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointManifest {
    depth: usize,
    atoms: Vec<usize>,
    mu: f64,
    iteration: usize,
    seed: u64,
}

/// Writes `D1.csv … DL.csv`, `Z.csv` and `manifest.json` into `dir`.
pub fn save_checkpoint(state: &DdlState, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    for (l, d) in state.dictionaries.iter().enumerate() {
        write_matrix_csv(dir.join(format!("D{}.csv", l + 1)), d)?;
    }
    write_matrix_csv(dir.join("Z.csv"), &state.z)?;
    let manifest = CheckpointManifest {
        depth: state.depth(),
        atoms: state.dictionaries.iter().map(|d| d.ncols()).collect(),
        mu: state.mu,
        iteration: state.iteration,
        seed: state.seed,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<DdlState> {
    let dir = dir.as_ref();
    let manifest_path = dir.join("manifest.json");
    let manifest: CheckpointManifest = serde_json::from_str(&fs::read_to_string(&manifest_path)?)
        .map_err(|e| Error::format(&manifest_path, e.to_string()))?;
    if manifest.atoms.len() != manifest.depth {
        return Err(Error::format(&manifest_path, "atoms length differs from depth"));
    }
    let dictionaries = (1..=manifest.depth)
        .map(|l| read_matrix_csv(dir.join(format!("D{l}.csv"))))
        .collect::<Result<Vec<_>>>()?;
    for (l, (d, &a)) in dictionaries.iter().zip(&manifest.atoms).enumerate() {
        let rows_ok = l == 0 || d.nrows() == manifest.atoms[l - 1];
        if d.ncols() != a || !rows_ok {
            return Err(Error::format(dir.join(format!("D{}.csv", l + 1)), "shape disagrees with manifest"));
        }
    }
    let z = read_matrix_csv(dir.join("Z.csv"))?;
    if z.nrows() != *manifest.atoms.last().unwrap_or(&0) {
        return Err(Error::format(dir.join("Z.csv"), "shape disagrees with manifest"));
    }
    Ok(DdlState {
        dictionaries,
        z,
        mu: manifest.mu,
        iteration: manifest.iteration,
        seed: manifest.seed,
    })
}
