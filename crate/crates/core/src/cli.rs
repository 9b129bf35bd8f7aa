//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numerical failure.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dataio::{
    read_cube, read_feature_csv, read_label_csv, synth_subspaces, write_feature_csv, write_label_csv, LabelEntry,
    SyntheticSpec,
};
use crate::ddl::ZMode;
use crate::features::FeatureMatrix;
use crate::metrics::{evaluate, NmiNorm};
use crate::pipeline::{self, Mode, PipelineConfig};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "ddlssc", version, about = "Joint deep dictionary learning + sparse subspace clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic union-of-subspaces dataset (X.csv, y.csv).
    Synth(SynthArgs),
    /// Extract patch+PCA features from a cube container.
    Features(FeaturesArgs),
    /// Run the full clustering pipeline.
    Cluster(ClusterArgs),
    /// Score a prediction label CSV against a truth label CSV.
    Metrics(MetricsArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    clusters: usize,
    #[arg(long)]
    subspace_dim: usize,
    #[arg(long)]
    ambient: usize,
    #[arg(long)]
    per_cluster: usize,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct FeaturesArgs {
    /// JSON header of the cube container.
    #[arg(long)]
    cube: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    /// Also write the labels of the kept pixels here.
    #[arg(long)]
    truth_out: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Args)]
struct ClusterArgs {
    #[arg(long, conflicts_with = "features", required_unless_present = "features")]
    cube: Option<PathBuf>,
    /// Feature CSV (header of `r:c` pixel indices).
    #[arg(long)]
    features: Option<PathBuf>,
    /// Label CSV (`row,col,label`); cubes use their own label payload.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Run directory.
    #[arg(short, long, default_value = "run")]
    output: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, value_parser = parse_nmi_norm)]
    nmi_norm: Option<NmiNorm>,
    /// Write the JSON report here as well as to stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

/// Pipeline settings; each flag overrides the same field from `--config`.
#[derive(Debug, Args, Default)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    pca_fraction: Option<f64>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    max_outer_iters: Option<usize>,
    #[arg(long)]
    stop_tol: Option<f64>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    #[arg(long, value_parser = parse_z_mode)]
    z_mode: Option<ZMode>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    nonneg_project: Option<bool>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, visible_alias = "k")]
    k_clusters: Option<usize>,
    #[arg(long)]
    lasso_tol: Option<f64>,
    #[arg(long)]
    lasso_max_iter: Option<usize>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    normalize_codes: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    normalize_features: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    include_unlabeled: Option<bool>,
    #[arg(long, value_parser = parse_nmi_norm)]
    nmi_norm: Option<NmiNorm>,
    #[arg(long)]
    threads: Option<usize>,
}

fn parse_enum<T: serde::de::DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_"))).map_err(|e| e.to_string())
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    parse_enum(s)
}

fn parse_z_mode(s: &str) -> std::result::Result<ZMode, String> {
    parse_enum(s)
}

fn parse_nmi_norm(s: &str) -> std::result::Result<NmiNorm, String> {
    parse_enum(s)
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            None => PipelineConfig::default(),
        };
        macro_rules! apply {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { cfg.$field = v; })*
            };
        }
        apply!(
            window,
            pca_fraction,
            depth,
            mu,
            lambda,
            max_outer_iters,
            stop_tol,
            mode,
            z_mode,
            nonneg_project,
            seed,
            lasso_tol,
            lasso_max_iter,
            normalize_codes,
            normalize_features,
            include_unlabeled,
            nmi_norm
        );
        if self.k_clusters.is_some() {
            cfg.k_clusters = self.k_clusters;
        }
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn exit_code(e: &Error) -> i32 {
    match e.root() {
        Error::Config(_) => 1,
        Error::SingularSylvester { .. } | Error::Numerical(_) => 3,
        _ => 2,
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Features(a) => features(a),
        Command::Cluster(a) => cluster(a),
        Command::Metrics(a) => metrics(a),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn entries_for(features: &FeatureMatrix, labels: &[u32]) -> Vec<LabelEntry> {
    features
        .pixel_index
        .iter()
        .zip(labels)
        .map(|(&(row, col), &label)| LabelEntry { row, col, label })
        .collect()
}

fn synth(a: SynthArgs) -> Result<()> {
    let spec = SyntheticSpec {
        clusters: a.clusters,
        subspace_dim: a.subspace_dim,
        ambient_dim: a.ambient,
        points_per_cluster: a.per_cluster,
        noise_sigma: a.sigma,
        seed: a.seed,
    };
    let (x, y) = synth_subspaces(&spec)?;
    fs::create_dir_all(&a.output)?;
    write_feature_csv(a.output.join("X.csv"), &x)?;
    write_label_csv(a.output.join("y.csv"), &entries_for(&x, &y))?;
    fs::write(a.output.join("spec.json"), serde_json::to_string_pretty(&spec)?)?;
    Ok(())
}

fn features(a: FeaturesArgs) -> Result<()> {
    let cfg = a.config.resolve()?;
    let (cube, labels) = read_cube(&a.cube)?;
    let x = pipeline::prepare_features(&cube, labels.as_ref(), &cfg)?;
    write_feature_csv(&a.output, &x)?;
    if let Some(path) = &a.truth_out {
        let labels = labels.ok_or_else(|| Error::InvalidInput("cube has no label payload".into()))?;
        write_label_csv(path, &entries_for(&x, &pipeline::truth_for(&x, &labels)))?;
    }
    Ok(())
}

/// Truth labels aligned with the feature columns; pixels absent from the
/// label file count as unlabeled.
fn align_truth(x: &FeatureMatrix, path: &Path) -> Result<Vec<u32>> {
    let table: HashMap<(usize, usize), u32> = read_label_csv(path)?
        .into_iter()
        .map(|e| ((e.row, e.col), e.label))
        .collect();
    let mut missing = 0;
    let truth = x
        .pixel_index
        .iter()
        .map(|p| {
            table.get(p).copied().unwrap_or_else(|| {
                missing += 1;
                0
            })
        })
        .collect();
    if missing > 0 {
        log::warn!("{missing} samples have no entry in {}; treated as unlabeled", path.display());
    }
    Ok(truth)
}

fn cluster(a: ClusterArgs) -> Result<()> {
    let cfg = a.config.resolve()?;
    let (x, truth, geometry) = match (&a.cube, &a.features) {
        (Some(header), _) => {
            let (cube, labels) = read_cube(header)?;
            let x = pipeline::prepare_features(&cube, labels.as_ref(), &cfg)?;
            let truth = match (&a.truth, &labels) {
                (Some(p), _) => Some(align_truth(&x, p)?),
                (None, Some(l)) => Some(pipeline::truth_for(&x, l)),
                (None, None) => None,
            };
            (x, truth, Some((cube.height, cube.width)))
        }
        (None, Some(path)) => {
            let mut x = read_feature_csv(path)?;
            if cfg.normalize_features {
                x.normalize_columns();
            }
            let truth = a.truth.as_deref().map(|p| align_truth(&x, p)).transpose()?;
            (x, truth, None)
        }
        (None, None) => return Err(Error::Config("either --cube or --features is required".into())),
    };
    let result = pipeline::run(&x, truth.as_deref(), &cfg)?;
    pipeline::write_run_dir(&result, &a.output, geometry)?;
    match &result.metrics {
        Some(m) => println!("{}", serde_json::to_string_pretty(m)?),
        None => println!("{{\"clusters\": {:?}}}", result.assignment.cluster_sizes()),
    }
    Ok(())
}

fn metrics(a: MetricsArgs) -> Result<()> {
    let truth: HashMap<(usize, usize), u32> = read_label_csv(&a.truth)?
        .into_iter()
        .map(|e| ((e.row, e.col), e.label))
        .collect();
    let (pred, gt): (Vec<u32>, Vec<u32>) = read_label_csv(&a.pred)?
        .into_iter()
        .map(|e| (e.label, truth.get(&(e.row, e.col)).copied().unwrap_or(0)))
        .unzip();
    let report = evaluate(&pred, &gt, a.nmi_norm.unwrap_or_default())?;
    let json = serde_json::to_string_pretty(&report)?;
    if let Some(path) = &a.output {
        fs::write(path, &json)?;
    }
    println!("{json}");
    Ok(())
}
