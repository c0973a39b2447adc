//! File-based stage orchestration behind the command-line tool.
//!
//! Stage outputs inside an output directory:
//!
//! ```text
//! dataset/                 simulate
//! features.csv             features
//! labels_<method>.csv      parcellate (x,y,label)
//! merges_<method>.jsonl    parcellate
//! refit_<method>/          refit (hrf_<parcel>.csv, amplitudes.csv, summary.json)
//! report.json, report.csv  mc
//! manifest_<stage>.json    every stage
//! ```
//!
//! Each stage function takes explicit input and output paths;
//! [`run_pipeline`] applies the layout above.

mod artifacts;
mod config;

pub use artifacts::{
    digest, read_features_csv, sha256_file, write_features_csv, write_merge_log, write_report_csv, FileDigest,
    Manifest, FEATURES_HEADER,
};
pub use config::{ExperimentConfig, McConfig, ParcellationConfig, SimulateConfig, CONFIG_VERSION};

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::info;
use serde::Serialize;
use thiserror::Error;

use crate::eval::{als_hrf_refit, detection_mse, monte_carlo, EvalError};
use crate::glmfit::{fit_voxels, GlmError};
use crate::parcellation::{Method, ParcelError};
use crate::simgen::io::{self, DataIoError};
use crate::simgen::{synthesize_dataset, SimError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("missing input {}: run the `{stage}` stage first", path.display())]
    MissingArtifact { path: PathBuf, stage: &'static str },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl PipelineError {
    /// Process exit status: 2 configuration, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Data(_) | Self::MissingArtifact { .. } => 3,
            Self::Numerical(_) => 4,
        }
    }
}

impl From<DataIoError> for PipelineError {
    fn from(e: DataIoError) -> Self {
        Self::Data(e.to_string())
    }
}

// Simulation errors only arise from the configured phantom.
impl From<SimError> for PipelineError {
    fn from(e: SimError) -> Self {
        Self::Config(e.to_string())
    }
}

fn glm_kind(e: &GlmError) -> fn(String) -> PipelineError {
    match e {
        GlmError::TooFewScans { .. } | GlmError::RankDeficient { .. } | GlmError::InvalidBasis(_) => {
            PipelineError::Config
        }
        GlmError::NonFinite | GlmError::LengthMismatch { .. } => PipelineError::Data,
        GlmError::Voxel { source, .. } => glm_kind(source),
    }
}

impl From<GlmError> for PipelineError {
    fn from(e: GlmError) -> Self {
        glm_kind(&e)(e.to_string())
    }
}

impl From<ParcelError> for PipelineError {
    fn from(e: ParcelError) -> Self {
        let kind = match e {
            ParcelError::InvalidTarget { .. } => Self::Config,
            ParcelError::SizeMismatch { .. } => Self::Data,
            ParcelError::NotAdjacent(..) | ParcelError::Stuck { .. } => Self::Numerical,
        };
        kind(e.to_string())
    }
}

fn eval_kind(e: &EvalError) -> fn(String) -> PipelineError {
    match e {
        EvalError::LengthMismatch { .. } | EvalError::ZeroTruth => PipelineError::Data,
        EvalError::SingularHrfSystem { .. } => PipelineError::Numerical,
        EvalError::InvalidSettings(_) | EvalError::Sim(_) => PipelineError::Config,
        EvalError::Glm(g) => glm_kind(g),
        EvalError::Parcel(p) => match p {
            ParcelError::InvalidTarget { .. } => PipelineError::Config,
            ParcelError::SizeMismatch { .. } => PipelineError::Data,
            _ => PipelineError::Numerical,
        },
        EvalError::Cell { source, .. } => eval_kind(source),
    }
}

impl From<EvalError> for PipelineError {
    fn from(e: EvalError) -> Self {
        eval_kind(&e)(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Simulate,
    Features,
    Parcellate,
    Refit,
    Mc,
    All,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Simulate => "simulate",
            Stage::Features => "features",
            Stage::Parcellate => "parcellate",
            Stage::Refit => "refit",
            Stage::Mc => "mc",
            Stage::All => "all",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Stage::Simulate, Stage::Features, Stage::Parcellate, Stage::Refit, Stage::Mc, Stage::All]
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown stage `{s}`"))
    }
}

/// Standard file names inside an output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }
    pub fn dataset(&self) -> PathBuf {
        self.root.join("dataset")
    }
    pub fn features(&self) -> PathBuf {
        self.root.join("features.csv")
    }
    pub fn labels(&self, m: Method) -> PathBuf {
        self.root.join(format!("labels_{m}.csv"))
    }
    pub fn merges(&self, m: Method) -> PathBuf {
        self.root.join(format!("merges_{m}.jsonl"))
    }
    pub fn refit(&self, m: Method) -> PathBuf {
        self.root.join(format!("refit_{m}"))
    }
    pub fn report(&self) -> PathBuf {
        self.root.join("report.json")
    }
    pub fn report_csv(&self) -> PathBuf {
        self.root.join("report.csv")
    }
}

/// Configuration plus the digest of the file it came from, if any.
#[derive(Debug, Clone)]
pub struct Run {
    pub config: ExperimentConfig,
    pub source: Option<FileDigest>,
}

impl Run {
    pub fn new(config: ExperimentConfig) -> Self {
        Self { config, source: None }
    }

    /// Loads and validates a configuration file, or uses the defaults.
    pub fn load(path: Option<&Path>) -> Result<Self, PipelineError> {
        match path {
            None => Ok(Self::new(ExperimentConfig::default())),
            Some(p) => {
                let config = ExperimentConfig::load(p)?;
                let sha256 = sha256_file(p)?;
                Ok(Self { config, source: Some(FileDigest { path: p.to_string_lossy().into(), sha256 }) })
            }
        }
    }

    fn manifest<'a>(&'a self, stage: &'a str) -> Manifest<'a> {
        let mut m = Manifest::new(stage, &self.config);
        m.inputs.extend(self.source.iter().cloned());
        m
    }
}

fn require(path: &Path, stage: &'static str) -> Result<(), PipelineError> {
    if path.exists() {
        Ok(())
    } else {
        Err(PipelineError::MissingArtifact { path: path.to_path_buf(), stage })
    }
}

fn create_dir(dir: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(|e| DataIoError::io(dir, e).into())
}

fn parent(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn file_label(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Simulates one dataset at the configured noise level into `dir`.
pub fn simulate(run: &Run, dir: &Path) -> Result<(), PipelineError> {
    let cfg = &run.config;
    let (grid, truth, paradigm) = cfg.phantom.build(cfg.seed)?;
    let dataset = synthesize_dataset(grid, truth, paradigm, cfg.drift, cfg.simulate.noise_variance, cfg.seed)?;
    io::save_dataset(&dataset, dir)?;
    let mut m = run.manifest("simulate");
    m.outputs = digest(dir, &file_label(dir))?;
    m.write(&parent(dir))?;
    info!("simulate: {} voxels x {} scans -> {}", dataset.n_voxels(), dataset.n_scans(), dir.display());
    Ok(())
}

/// Fits the GLM to every voxel of the dataset in `data_dir`.
pub fn features(run: &Run, data_dir: &Path, out: &Path) -> Result<(), PipelineError> {
    require(&data_dir.join(io::DATASET_MANIFEST), "simulate")?;
    let dataset = io::load_dataset(data_dir)?;
    let design = run.config.glm.design(&dataset.paradigm)?;
    let fits = fit_voxels(&dataset, &design)?;
    write_features_csv(out, &dataset.grid, &fits)?;
    let mut m = run.manifest("features");
    m.inputs.extend(digest(data_dir, &file_label(data_dir))?);
    m.outputs = digest(out, &file_label(out))?;
    m.write(&parent(out))?;
    info!("features: {} voxels -> {}", fits.len(), out.display());
    Ok(())
}

/// Output paths of one parcellation method.
#[derive(Debug, Clone)]
pub struct ParcellateJob {
    pub method: Method,
    pub labels: PathBuf,
    pub merge_log: Option<PathBuf>,
}

/// Parcellates the features in `features_csv` with every job's method.
/// The manifest goes next to the first job's labels.
pub fn parcellate(
    run: &Run,
    features_csv: &Path,
    target_parcels: usize,
    jobs: &[ParcellateJob],
) -> Result<(), PipelineError> {
    require(features_csv, "features")?;
    let (grid, features) = read_features_csv(features_csv)?;
    let mut m = run.manifest("parcellate");
    m.inputs.extend(digest(features_csv, &file_label(features_csv))?);
    for job in jobs {
        let (state, log) = job.method.run(&features, grid, target_parcels)?;
        io::write_grid_csv(&job.labels, &grid, "label", &state.dense_labels())?;
        m.outputs.extend(digest(&job.labels, &file_label(&job.labels))?);
        if let Some(path) = &job.merge_log {
            write_merge_log(path, &log)?;
            m.outputs.extend(digest(path, &file_label(path))?);
        }
        info!("parcellate: {} -> {} parcels in {}", job.method, target_parcels, job.labels.display());
    }
    if let Some(first) = jobs.first() {
        m.write(&parent(&first.labels))?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct RefitSummary {
    parcels: usize,
    /// Relative amplitude error against the simulation ground truth.
    detection_mse: Option<f64>,
    iterations: BTreeMap<usize, usize>,
    residuals: BTreeMap<usize, Vec<f64>>,
}

/// Refits one FIR HRF per parcel of `labels_csv` on the dataset in
/// `data_dir`; writes `hrf_<parcel>.csv`, `amplitudes.csv` and
/// `summary.json` into `out_dir`.
pub fn refit(run: &Run, data_dir: &Path, labels_csv: &Path, out_dir: &Path) -> Result<(), PipelineError> {
    require(&data_dir.join(io::DATASET_MANIFEST), "simulate")?;
    require(labels_csv, "parcellate")?;
    let dataset = io::load_dataset(data_dir)?;
    let labels: Vec<usize> = io::read_map_csv(labels_csv, &dataset.grid)?;
    let result = als_hrf_refit(&dataset, &labels, &run.config.refit)?;
    create_dir(out_dir)?;
    for (parcel, h) in &result.hrfs {
        io::write_hrf_csv(&out_dir.join(format!("hrf_{parcel}.csv")), h)?;
    }
    let amps = result.condition_amplitudes(0);
    io::write_map_csv(&out_dir.join("amplitudes.csv"), &dataset.grid, &amps)?;
    let a_true: Vec<f64> = dataset.truth.amplitudes.iter().map(|a| a[0]).collect();
    let summary = RefitSummary {
        parcels: result.hrfs.len(),
        detection_mse: detection_mse(&amps, &a_true).ok(),
        iterations: result.traces.iter().map(|(k, t)| (*k, t.len() - 1)).collect(),
        residuals: result.traces,
    };
    io::write_json(&out_dir.join("summary.json"), &summary)?;
    let mut m = run.manifest("refit");
    m.inputs.extend(digest(data_dir, &file_label(data_dir))?);
    m.inputs.extend(digest(labels_csv, &file_label(labels_csv))?);
    m.outputs = digest(out_dir, ".")?;
    m.write(out_dir)?;
    info!("refit: {} parcels -> {}", summary.parcels, out_dir.display());
    Ok(())
}

/// Runs the Monte Carlo sweep; writes the JSON report and its long-format
/// CSV companion.
pub fn mc(run: &Run, report_json: &Path, report_csv: &Path) -> Result<(), PipelineError> {
    let cfg = &run.config;
    info!("mc: {} noise levels x {} runs", cfg.mc.noise_grid.len(), cfg.mc.runs);
    let report = monte_carlo(&cfg.experiment(), &cfg.mc_spec())?;
    io::write_json(report_json, &report)?;
    write_report_csv(report_csv, &report)?;
    let mut m = run.manifest("mc");
    m.outputs = digest(report_json, &file_label(report_json))?;
    m.outputs.extend(digest(report_csv, &file_label(report_csv))?);
    m.write(&parent(report_json))?;
    for (method, levels) in &report.methods {
        for l in levels {
            info!("mc: {method} sigma2={} MI={:.4} (sd {:.4})", l.sigma2, l.mi_mean, l.mi_std);
        }
    }
    Ok(())
}

/// Runs `stage` with the standard layout under `out_dir`; `all` chains
/// every stage in order.
pub fn run_pipeline(run: &Run, stage: Stage, out_dir: &Path) -> Result<(), PipelineError> {
    let layout = Layout::new(out_dir);
    create_dir(out_dir)?;
    let methods = &run.config.parcellation.methods;
    match stage {
        Stage::Simulate => simulate(run, &layout.dataset()),
        Stage::Features => features(run, &layout.dataset(), &layout.features()),
        Stage::Parcellate => {
            let jobs: Vec<ParcellateJob> = methods
                .iter()
                .map(|&m| ParcellateJob { method: m, labels: layout.labels(m), merge_log: Some(layout.merges(m)) })
                .collect();
            parcellate(run, &layout.features(), run.config.parcellation.target_parcels, &jobs)
        }
        Stage::Refit => {
            methods.iter().try_for_each(|&m| refit(run, &layout.dataset(), &layout.labels(m), &layout.refit(m)))
        }
        Stage::Mc => mc(run, &layout.report(), &layout.report_csv()),
        Stage::All => [Stage::Simulate, Stage::Features, Stage::Parcellate, Stage::Refit, Stage::Mc]
            .into_iter()
            .try_for_each(|s| run_pipeline(run, s, out_dir)),
    }
}
