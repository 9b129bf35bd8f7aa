//! End-to-end runs: features, the alternating dictionary/self-expression
//! loop, affinity, normalized cuts and scoring.
//!
//! Each outer iteration of [`run_joint`] updates `D_1, …, D_L`, then `Z`, then
//! the code matrix `C`, and stops once `C` changes by less than `stop_tol`
//! (relative Frobenius norm). [`run_piecemeal`] is the ablation that learns
//! the dictionaries without the self-expression term and clusters once at
//! the end; [`run_classical_ssc`] skips dictionaries altogether.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataio::{write_sparse_cluster_map, write_trace_csv, HyperCube, LabelMap};
use crate::ddl::{self, DdlState, LayerSchedule, ObjectiveBreakdown, ZMode};
use crate::features::{extract_patches, pca_fit_transform, FeatureMatrix};
use crate::metrics::{evaluate, MetricReport, NmiNorm};
use crate::ncuts::{normalized_cuts, ClusterAssignment};
use crate::ssc::{affinity, build_code_matrix, code_delta, CodeMatrix, LassoOptions};
use crate::{DMatrix, Error, Result};

/// Largest sample count accepted; the `m × m` code matrix and the `O(m³)`
/// Sylvester solve make bigger runs impractical on one machine.
pub const MAX_SAMPLES: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Joint,
    Piecemeal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub window: usize,
    pub pca_fraction: f64,
    pub depth: usize,
    pub mu: f64,
    pub lambda: f64,
    pub max_outer_iters: usize,
    /// Threshold on the relative change of `C` (joint) or of the
    /// reconstruction error (piecemeal phase 1).
    pub stop_tol: f64,
    pub mode: Mode,
    pub z_mode: ZMode,
    pub nonneg_project: bool,
    pub seed: u64,
    /// Number of clusters; inferred from the ground truth when absent.
    pub k_clusters: Option<usize>,
    pub lasso_tol: f64,
    pub lasso_max_iter: usize,
    /// Scale columns of `Z` to unit norm before each code-matrix build.
    /// Without it the shrinking `Z` of the joint loop drives every lasso to
    /// the zero solution at `λ = 1`.
    pub normalize_codes: bool,
    /// Scale feature columns to unit norm after PCA.
    pub normalize_features: bool,
    /// Cluster every pixel of a cube instead of labeled pixels only.
    pub include_unlabeled: bool,
    pub nmi_norm: NmiNorm,
    /// Worker threads for the lasso fan-out; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window: 3,
            pca_fraction: 0.10,
            depth: 3,
            mu: 1.0,
            lambda: 1.0,
            max_outer_iters: 100,
            stop_tol: 1e-4,
            mode: Mode::Joint,
            z_mode: ZMode::PaperExact,
            nonneg_project: false,
            seed: 0,
            k_clusters: None,
            lasso_tol: 1e-6,
            lasso_max_iter: 2000,
            normalize_codes: true,
            normalize_features: true,
            include_unlabeled: false,
            nmi_norm: NmiNorm::Geometric,
            threads: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.window == 0 || self.window.is_multiple_of(2) {
            return bad(format!("window must be odd and positive, got {}", self.window));
        }
        if !(self.pca_fraction > 0.0 && self.pca_fraction <= 1.0) {
            return bad(format!("pca_fraction must be in (0, 1], got {}", self.pca_fraction));
        }
        if !(1..=ddl::MAX_DEPTH).contains(&self.depth) {
            return bad(format!("depth must be in 1..={}, got {}", ddl::MAX_DEPTH, self.depth));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return bad(format!("mu must be finite and >= 0, got {}", self.mu));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be finite and > 0, got {}", self.lambda));
        }
        if self.max_outer_iters == 0 {
            return bad("max_outer_iters must be positive".into());
        }
        if !(self.stop_tol > 0.0) {
            return bad(format!("stop_tol must be > 0, got {}", self.stop_tol));
        }
        if !(self.lasso_tol > 0.0) || self.lasso_max_iter == 0 {
            return bad("lasso_tol must be > 0 and lasso_max_iter positive".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        Ok(())
    }

    fn lasso_options(&self) -> LassoOptions {
        LassoOptions {
            lambda: self.lambda,
            tol: self.lasso_tol,
            max_iter: self.lasso_max_iter,
        }
    }
}

/// One row of the convergence trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub objective: ObjectiveBreakdown,
    pub delta_c: f64,
    /// Reconstruction error after each dictionary update of this iteration.
    pub dict_recon: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    IterationCap,
    /// No outer loop (classical SSC).
    SinglePass,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub assignment: ClusterAssignment,
    pub metrics: Option<MetricReport>,
    pub trace: Vec<TraceRecord>,
    pub stop_reason: StopReason,
    pub wall_time_secs: f64,
    /// The configuration actually used, with `k_clusters` resolved.
    pub config: PipelineConfig,
    pub pixel_index: Vec<(usize, usize)>,
    pub codes: CodeMatrix,
    /// Final dictionaries and representation; `None` for classical SSC.
    pub state: Option<DdlState>,
}

impl RunResult {
    pub fn labels_u32(&self) -> Vec<u32> {
        self.assignment.labels.iter().map(|&l| l as u32).collect()
    }
}

/// Patches, PCA and optional column normalization for a cube. Only pixels
/// with a nonzero label are kept unless `include_unlabeled` is set or no
/// labels are given.
pub fn prepare_features(cube: &HyperCube, labels: Option<&LabelMap>, cfg: &PipelineConfig) -> Result<FeatureMatrix> {
    cfg.validate()?;
    let mask = if cfg.include_unlabeled { None } else { labels };
    let raw = extract_patches(cube, cfg.window, mask)?;
    let (mut features, _) = pca_fit_transform(&raw, cfg.pca_fraction)?;
    if cfg.normalize_features {
        features.normalize_columns();
    }
    Ok(features)
}

/// Ground-truth labels of the feature columns, read from the label map.
pub fn truth_for(features: &FeatureMatrix, labels: &LabelMap) -> Vec<u32> {
    features.pixel_index.iter().map(|&(r, c)| labels.get(r, c)).collect()
}

fn resolve(x: &FeatureMatrix, truth: Option<&[u32]>, cfg: &PipelineConfig) -> Result<PipelineConfig> {
    cfg.validate()?;
    let m = x.samples();
    if let Some(t) = truth {
        if t.len() != m {
            return Err(Error::InvalidInput(format!("{} truth labels for {m} samples", t.len())));
        }
    }
    if m > MAX_SAMPLES {
        return Err(Error::InvalidInput(format!(
            "{m} samples exceeds the limit of {MAX_SAMPLES}; subsample or cluster labeled pixels only"
        )));
    }
    let k = match (cfg.k_clusters, truth) {
        (Some(k), _) => k,
        (None, Some(t)) => t.iter().filter(|&&l| l != 0).collect::<BTreeSet<_>>().len(),
        (None, None) => return Err(Error::Config("k_clusters is required without ground truth".into())),
    };
    if k < 2 {
        return Err(Error::InvalidInput(format!("at least 2 clusters are required, got {k}")));
    }
    if k > m {
        return Err(Error::InvalidInput(format!("{k} clusters requested for {m} samples")));
    }
    Ok(PipelineConfig {
        k_clusters: Some(k),
        ..cfg.clone()
    })
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(f),
    }
}

fn unit_columns(z: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = z.clone();
    for mut c in out.column_iter_mut() {
        let n = c.norm();
        if n > 0.0 {
            c /= n;
        }
    }
    out
}

fn codes_for(z: &DMatrix<f64>, cfg: &PipelineConfig, warm: Option<&CodeMatrix>) -> Result<CodeMatrix> {
    if cfg.normalize_codes {
        build_code_matrix(&unit_columns(z), &cfg.lasso_options(), warm)
    } else {
        build_code_matrix(z, &cfg.lasso_options(), warm)
    }
}

fn finish(
    start: Instant,
    cfg: PipelineConfig,
    x: &FeatureMatrix,
    truth: Option<&[u32]>,
    codes: CodeMatrix,
    trace: Vec<TraceRecord>,
    stop_reason: StopReason,
    state: Option<DdlState>,
) -> Result<RunResult> {
    let k = cfg.k_clusters.expect("resolved");
    let assignment = normalized_cuts(&affinity(&codes), k, cfg.seed)?;
    let metrics = match truth {
        Some(t) => {
            let pred: Vec<u32> = assignment.labels.iter().map(|&l| l as u32).collect();
            Some(evaluate(&pred, t, cfg.nmi_norm)?)
        }
        None => None,
    };
    Ok(RunResult {
        assignment,
        metrics,
        trace,
        stop_reason,
        wall_time_secs: start.elapsed().as_secs_f64(),
        config: cfg,
        pixel_index: x.pixel_index.clone(),
        codes,
        state,
    })
}

/// Runs `cfg.mode`.
pub fn run(x: &FeatureMatrix, truth: Option<&[u32]>, cfg: &PipelineConfig) -> Result<RunResult> {
    match cfg.mode {
        Mode::Joint => run_joint(x, truth, cfg),
        Mode::Piecemeal => run_piecemeal(x, truth, cfg),
    }
}

pub fn run_joint(x: &FeatureMatrix, truth: Option<&[u32]>, cfg: &PipelineConfig) -> Result<RunResult> {
    let start = Instant::now();
    let cfg = resolve(x, truth, cfg)?;
    in_pool(cfg.threads, || {
        let data = &x.data;
        let m = x.samples();
        let schedule = LayerSchedule::halving(x.dim(), cfg.depth)?;
        let mut state = ddl::init_state(data, &schedule, cfg.mu, cfg.seed)?;
        let mut codes = CodeMatrix::zeros(m, cfg.lambda);
        let mut trace = Vec::new();
        let mut stop = StopReason::IterationCap;
        for it in 1..=cfg.max_outer_iters {
            let step = || -> Result<(DdlState, CodeMatrix, TraceRecord)> {
                let mut s = state.clone();
                let mut dict_recon = Vec::with_capacity(s.depth());
                for layer in 0..s.depth() {
                    s = ddl::update_dictionary(&s, data, layer)?;
                    dict_recon.push(s.recon_error(data));
                }
                s = ddl::update_z(&s, data, &codes, cfg.z_mode, cfg.nonneg_project)?;
                s.iteration = it;
                let next = codes_for(&s.z, &cfg, Some(&codes))?;
                let delta_c = code_delta(&next, &codes)?;
                let objective = ddl::objective(&s, data, &next, cfg.lambda)?;
                Ok((s, next, TraceRecord { iter: it, objective, delta_c, dict_recon }))
            };
            let (s, next, rec) = step().map_err(|e| e.at_iteration(it))?;
            log::info!(
                "iter {it}: total {:.6e} recon {:.6e} ssc {:.6e} l1 {:.6e} delta_C {:.3e}",
                rec.objective.total,
                rec.objective.recon,
                rec.objective.ssc,
                rec.objective.l1,
                rec.delta_c
            );
            let done = rec.delta_c < cfg.stop_tol;
            state = s;
            codes = next;
            trace.push(rec);
            if done {
                stop = StopReason::Converged;
                break;
            }
        }
        finish(start, cfg.clone(), x, truth, codes, trace, stop, Some(state))
    })
}

pub fn run_piecemeal(x: &FeatureMatrix, truth: Option<&[u32]>, cfg: &PipelineConfig) -> Result<RunResult> {
    let start = Instant::now();
    let cfg = resolve(x, truth, cfg)?;
    in_pool(cfg.threads, || {
        let data = &x.data;
        let m = x.samples();
        let schedule = LayerSchedule::halving(x.dim(), cfg.depth)?;
        let mut state = ddl::init_state(data, &schedule, 0.0, cfg.seed)?;
        let none = CodeMatrix::zeros(m, cfg.lambda);
        let mut prev = state.recon_error(data);
        let mut trace = Vec::new();
        let mut stop = StopReason::IterationCap;
        for it in 1..=cfg.max_outer_iters {
            let step = || -> Result<(DdlState, TraceRecord)> {
                let mut s = state.clone();
                let mut dict_recon = Vec::with_capacity(s.depth());
                for layer in 0..s.depth() {
                    s = ddl::update_dictionary(&s, data, layer)?;
                    dict_recon.push(s.recon_error(data));
                }
                s = ddl::update_z(&s, data, &none, cfg.z_mode, cfg.nonneg_project)?;
                s.iteration = it;
                let recon = s.recon_error(data);
                let objective = ObjectiveBreakdown {
                    recon,
                    ssc: 0.0,
                    l1: 0.0,
                    total: recon,
                };
                Ok((s, TraceRecord { iter: it, objective, delta_c: 0.0, dict_recon }))
            };
            let (s, rec) = step().map_err(|e| e.at_iteration(it))?;
            let recon = rec.objective.recon;
            let change = (prev - recon).abs() / prev.max(1e-12);
            log::info!("iter {it}: recon {recon:.6e} (relative change {change:.3e})");
            state = s;
            prev = recon;
            trace.push(rec);
            if change < cfg.stop_tol {
                stop = StopReason::Converged;
                break;
            }
        }
        let codes = codes_for(&state.z, &cfg, None).map_err(|e| e.at_iteration(trace.len()))?;
        state.mu = cfg.mu;
        finish(start, cfg.clone(), x, truth, codes, trace, stop, Some(state))
    })
}

/// Self-expression and normalized cuts directly on `X`, with no dictionaries.
pub fn run_classical_ssc(x: &FeatureMatrix, truth: Option<&[u32]>, cfg: &PipelineConfig) -> Result<RunResult> {
    let start = Instant::now();
    let cfg = resolve(x, truth, cfg)?;
    in_pool(cfg.threads, || {
        let codes = codes_for(&x.data, &cfg, None)?;
        finish(start, cfg.clone(), x, truth, codes, Vec::new(), StopReason::SinglePass, None)
    })
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a PipelineConfig,
    seed: u64,
    version: &'static str,
    nalgebra: &'static str,
    stop_reason: StopReason,
    iterations: usize,
    samples: usize,
    clusters: usize,
    degenerate: bool,
    wall_time_secs: f64,
}

/// Writes `metrics.json` (when scored), `trace.csv`, `clusters.csv`,
/// `clusters.pgm` (when `geometry` is known) and `manifest.json`.
pub fn write_run_dir(result: &RunResult, dir: impl AsRef<Path>, geometry: Option<(usize, usize)>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    if let Some(m) = &result.metrics {
        fs::write(dir.join("metrics.json"), serde_json::to_string_pretty(m)?)?;
    }
    write_trace_csv(dir.join("trace.csv"), &result.trace)?;
    write_sparse_cluster_map(&result.pixel_index, &result.assignment.labels, geometry, dir.join("clusters"))?;
    let manifest = Manifest {
        config: &result.config,
        seed: result.config.seed,
        version: env!("CARGO_PKG_VERSION"),
        nalgebra: "0.35",
        stop_reason: result.stop_reason,
        iterations: result.trace.len(),
        samples: result.pixel_index.len(),
        clusters: result.assignment.k,
        degenerate: result.assignment.degenerate,
        wall_time_secs: result.wall_time_secs,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{synth_subspaces, SyntheticSpec};

    fn small(seed: u64) -> (FeatureMatrix, Vec<u32>) {
        synth_subspaces(&SyntheticSpec {
            clusters: 3,
            subspace_dim: 2,
            ambient_dim: 24,
            points_per_cluster: 15,
            noise_sigma: 0.0,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn defaults() {
        let c = PipelineConfig::default();
        assert_eq!((c.mu, c.lambda, c.depth, c.window), (1.0, 1.0, 3, 3));
        assert_eq!((c.pca_fraction, c.stop_tol, c.max_outer_iters), (0.1, 1e-4, 100));
        let parsed: PipelineConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(parsed, c);
        assert!(serde_json::from_str::<PipelineConfig>("{\"nope\": 1}").is_err());
    }

    #[test]
    fn config_echoed_into_result() {
        let (x, y) = small(1);
        let cfg = PipelineConfig { depth: 2, max_outer_iters: 3, ..Default::default() };
        let r = run_joint(&x, Some(&y), &cfg).unwrap();
        assert_eq!(r.config.k_clusters, Some(3));
        assert_eq!((r.config.mu, r.config.lambda), (1.0, 1.0));
        assert!(r.trace.len() <= 3);
    }

    #[test]
    fn single_cluster_rejected() {
        let (x, _) = small(2);
        let cfg = PipelineConfig { k_clusters: Some(1), ..Default::default() };
        assert!(matches!(run_joint(&x, None, &cfg), Err(Error::InvalidInput(_))));
        let missing = PipelineConfig::default();
        assert!(matches!(run_joint(&x, None, &missing), Err(Error::Config(_))));
    }

    #[test]
    fn stops_by_tolerance_or_cap() {
        let (x, y) = small(3);
        let cfg = PipelineConfig { depth: 2, max_outer_iters: 40, ..Default::default() };
        let r = run_joint(&x, Some(&y), &cfg).unwrap();
        let last = r.trace.last().unwrap();
        match r.stop_reason {
            StopReason::Converged => assert!(last.delta_c < cfg.stop_tol),
            StopReason::IterationCap => assert_eq!(r.trace.len(), 40),
            StopReason::SinglePass => unreachable!(),
        }
        for rec in &r.trace {
            let o = &rec.objective;
            assert!(o.recon >= 0.0 && o.ssc >= 0.0 && o.l1 >= 0.0);
        }
    }

    #[test]
    fn piecemeal_trace_has_no_self_expression_terms() {
        let (x, y) = small(4);
        let cfg = PipelineConfig { depth: 2, mode: Mode::Piecemeal, ..Default::default() };
        let r = run(&x, Some(&y), &cfg).unwrap();
        assert!(!r.trace.is_empty());
        assert!(r.trace.iter().all(|t| t.objective.ssc == 0.0 && t.objective.l1 == 0.0));
    }

    #[test]
    fn run_dir_contents() {
        let (x, y) = small(5);
        let cfg = PipelineConfig { depth: 2, max_outer_iters: 2, ..Default::default() };
        let r = run_joint(&x, Some(&y), &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_run_dir(&r, dir.path(), None).unwrap();
        for f in ["metrics.json", "trace.csv", "clusters.csv", "manifest.json"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        assert!(!dir.path().join("clusters.pgm").exists());
        let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
        assert_eq!(trace.lines().count(), r.trace.len() + 1);
    }
}
