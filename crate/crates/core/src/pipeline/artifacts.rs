//! File formats written by the pipeline stages and the per-stage manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{ExperimentConfig, PipelineError};
use crate::eval::McReport;
use crate::glmfit::{FeatureMap, GlmFit};
use crate::parcellation::MergeRecord;
use crate::simgen::io::DataIoError;
use crate::simgen::Grid2D;

pub const FEATURES_HEADER: [&str; 9] = ["voxel", "x", "y", "beta0", "beta1", "beta2", "t0", "p0", "alpha"];

fn csv_err(path: &Path, e: csv::Error) -> PipelineError {
    DataIoError::csv(path, e).into()
}

fn io_err(path: &Path, e: std::io::Error) -> PipelineError {
    DataIoError::io(path, e).into()
}

/// Hex SHA-256 of a file's bytes.
pub fn sha256_file(path: &Path) -> Result<String, PipelineError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Files under `dir`, sorted, as paths relative to `dir`. Stage manifests
/// are skipped so that a manifest never hashes an earlier one.
fn files_under(dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let mut out = Vec::new();
    let mut stack = vec![PathBuf::new()];
    while let Some(rel) = stack.pop() {
        let abs = dir.join(&rel);
        for entry in fs::read_dir(&abs).map_err(|e| io_err(&abs, e))? {
            let entry = entry.map_err(|e| io_err(&abs, e))?;
            let child = rel.join(entry.file_name());
            if entry.file_type().map_err(|e| io_err(&abs, e))?.is_dir() {
                stack.push(child);
            } else if !is_manifest(&child) {
                out.push(child);
            }
        }
    }
    out.sort();
    Ok(out)
}

fn is_manifest(path: &Path) -> bool {
    path.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("manifest_") && n.ends_with(".json"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Digests of a file, or of every file below a directory. `label` is the
/// path recorded for `path` itself.
pub fn digest(path: &Path, label: &str) -> Result<Vec<FileDigest>, PipelineError> {
    if path.is_dir() {
        files_under(path)?
            .into_iter()
            .map(|rel| {
                let shown = Path::new(label).join(&rel);
                Ok(FileDigest {
                    path: shown.to_string_lossy().replace('\\', "/"),
                    sha256: sha256_file(&path.join(&rel))?,
                })
            })
            .collect()
    } else {
        Ok(vec![FileDigest { path: label.to_string(), sha256: sha256_file(path)? }])
    }
}

/// Provenance record of one stage. Contains no timestamps or absolute
/// paths so that reruns reproduce it byte for byte.
#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub stage: &'a str,
    pub tool: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub config: &'a ExperimentConfig,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

impl<'a> Manifest<'a> {
    pub fn new(stage: &'a str, config: &'a ExperimentConfig) -> Self {
        Self {
            stage,
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            seed: config.seed,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, PipelineError> {
        let path = dir.join(format!("manifest_{}.json", self.stage));
        crate::simgen::io::write_json(&path, self)?;
        Ok(path)
    }
}

/// Writes `voxel,x,y,beta0,beta1,beta2,t0,p0,alpha`.
pub fn write_features_csv(path: &Path, grid: &Grid2D, fits: &[GlmFit]) -> Result<(), PipelineError> {
    let features = FeatureMap::from_fits(fits);
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(FEATURES_HEADER).map_err(|e| csv_err(path, e))?;
    for (j, f) in fits.iter().enumerate() {
        let (x, y) = grid.coords(j);
        let row = [
            j.to_string(),
            x.to_string(),
            y.to_string(),
            f.beta[0].to_string(),
            f.beta[1].to_string(),
            f.beta[2].to_string(),
            f.t0.to_string(),
            f.p0.to_string(),
            features.alpha[j].to_string(),
        ];
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Reads a features CSV. The grid is the bounding box of the coordinates and
/// every voxel must be present exactly once with `voxel = y * width + x`.
pub fn read_features_csv(path: &Path) -> Result<(Grid2D, FeatureMap), PipelineError> {
    let bad = |msg: String| PipelineError::from(DataIoError::format(path, msg));
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let col = |name: &str| {
        header.iter().position(|h| h.trim() == name).ok_or_else(|| bad(format!("missing column `{name}`")))
    };
    let (cv, cx, cy, c1, c2, ca) = (col("voxel")?, col("x")?, col("y")?, col("beta1")?, col("beta2")?, col("alpha")?);
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let get = |c: usize| rec.get(c).map(str::trim).unwrap_or("");
        let int = |c: usize| get(c).parse::<usize>().map_err(|_| bad(format!("row {}: bad integer", line + 2)));
        let num = |c: usize| {
            get(c)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(format!("row {}: bad number", line + 2)))
        };
        rows.push((int(cv)?, int(cx)?, int(cy)?, [num(c1)?, num(c2)?], num(ca)?));
    }
    let width = rows.iter().map(|r| r.1 + 1).max().ok_or_else(|| bad("no rows".into()))?;
    let height = rows.iter().map(|r| r.2 + 1).max().unwrap_or(0);
    let grid = Grid2D::new(width, height).map_err(|e| bad(e.to_string()))?;
    if rows.len() != grid.n_voxels() {
        return Err(bad(format!("{} rows for a {width}x{height} grid", rows.len())));
    }
    let mut phi = vec![None; grid.n_voxels()];
    let mut alpha = vec![0.0; grid.n_voxels()];
    for (v, x, y, p, a) in rows {
        if v != grid.index(x, y) || phi[v].is_some() {
            return Err(bad(format!("voxel {v} at ({x},{y}) is misplaced or repeated")));
        }
        if !(0.0..=1.0).contains(&a) {
            return Err(bad(format!("voxel {v}: alpha {a} outside [0, 1]")));
        }
        phi[v] = Some(p);
        alpha[v] = a;
    }
    let phi = phi.into_iter().map(|p| p.expect("all voxels checked")).collect();
    Ok((grid, FeatureMap::new(phi, alpha)))
}

pub fn write_merge_log(path: &Path, log: &[MergeRecord]) -> Result<(), PipelineError> {
    let mut text = String::new();
    for r in log {
        text.push_str(&serde_json::to_string(r).map_err(|e| PipelineError::from(DataIoError::json(path, e)))?);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Long-format report: `method,sigma2,run,mi,mse,wall_ms`. Missing values
/// are empty fields.
pub fn write_report_csv(path: &Path, report: &McReport) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["method", "sigma2", "run", "mi", "mse", "wall_ms"]).map_err(|e| csv_err(path, e))?;
    for (method, levels) in &report.methods {
        for level in levels {
            for (run, mi) in level.mi.iter().enumerate() {
                let mse = level.mse.as_ref().map(|v| v[run]);
                let ms = level.wall_ms.as_ref().map(|v| v[run]);
                let row =
                    [method.clone(), level.sigma2.to_string(), run.to_string(), mi.to_string(), opt(mse), opt(ms)];
                w.write_record(&row).map_err(|e| csv_err(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}
