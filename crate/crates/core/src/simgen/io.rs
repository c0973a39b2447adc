//! On-disk dataset layout.
//!
//! ```text
//! dataset.json     grid, paradigm, noise, seed, true HRFs, binary layout
//! y.bin            f64 little-endian, voxel-major: y[j][n] at offset 8*(j*N + n)
//! parcels.csv      x,y,value   ground-truth territory
//! activation.csv   x,y,value   0/1 activation label
//! amplitudes.csv   x,y,value   (amplitudes_<m>.csv when there are several conditions)
//! drift.csv        voxel,l0,..  drift coefficients
//! hrf_true_<k>.csv t,h
//! ```

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Dataset, Grid2D, GroundTruth, HrfCurve, Paradigm};

pub const DATASET_MANIFEST: &str = "dataset.json";
pub const SERIES_FILE: &str = "y.bin";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DataIoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

impl DataIoError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }
    pub(crate) fn csv(path: &Path, source: csv::Error) -> Self {
        Self::Csv { path: path.to_path_buf(), source }
    }
    pub(crate) fn json(path: &Path, source: serde_json::Error) -> Self {
        Self::Json { path: path.to_path_buf(), source }
    }
    pub(crate) fn format(path: &Path, msg: impl Into<String>) -> Self {
        Self::Format { path: path.to_path_buf(), msg: msg.into() }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SeriesLayout {
    file: String,
    dtype: String,
    byte_order: String,
    order: String,
    shape: [usize; 2],
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetManifest {
    format_version: u32,
    width: usize,
    height: usize,
    n_scans: usize,
    tr: f64,
    dt: f64,
    seed: u64,
    noise_variance: f64,
    drift_order: usize,
    n_parcels: usize,
    n_conditions: usize,
    onsets: Vec<Vec<f64>>,
    hrfs: Vec<Vec<f64>>,
    series: SeriesLayout,
}

/// Writes a CSV with header `x,y,value`, one row per voxel in index order.
pub fn write_map_csv<T: std::fmt::Display>(path: &Path, grid: &Grid2D, values: &[T]) -> Result<(), DataIoError> {
    write_grid_csv(path, grid, "value", values)
}

/// As [`write_map_csv`] with a custom name for the value column.
pub fn write_grid_csv<T: std::fmt::Display>(
    path: &Path,
    grid: &Grid2D,
    column: &str,
    values: &[T],
) -> Result<(), DataIoError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| DataIoError::csv(path, e))?;
    w.write_record(["x", "y", column]).map_err(|e| DataIoError::csv(path, e))?;
    for (j, v) in values.iter().enumerate() {
        let (x, y) = grid.coords(j);
        w.write_record([x.to_string(), y.to_string(), v.to_string()]).map_err(|e| DataIoError::csv(path, e))?;
    }
    w.flush().map_err(|e| DataIoError::io(path, e))
}

/// Reads an `x,y,<value>` CSV into a per-voxel vector. The header names are
/// not checked; every voxel must appear exactly once.
pub fn read_map_csv<T: std::str::FromStr>(path: &Path, grid: &Grid2D) -> Result<Vec<T>, DataIoError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| DataIoError::csv(path, e))?;
    let mut out: Vec<Option<T>> = (0..grid.n_voxels()).map(|_| None).collect();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| DataIoError::csv(path, e))?;
        let field = |i: usize| rec.get(i).map(str::trim).unwrap_or("");
        let bad = |what: &str| DataIoError::format(path, format!("row {}: bad {what}", line + 2));
        let x: usize = field(0).parse().map_err(|_| bad("x"))?;
        let y: usize = field(1).parse().map_err(|_| bad("y"))?;
        let v: T = field(2).parse().map_err(|_| bad("value"))?;
        if x >= grid.width() || y >= grid.height() {
            return Err(bad("coordinates"));
        }
        let slot = &mut out[grid.index(x, y)];
        if slot.is_some() {
            return Err(DataIoError::format(path, format!("voxel ({x},{y}) listed twice")));
        }
        *slot = Some(v);
    }
    out.into_iter()
        .enumerate()
        .map(|(j, v)| {
            v.ok_or_else(|| {
                let (x, y) = grid.coords(j);
                DataIoError::format(path, format!("voxel ({x},{y}) missing"))
            })
        })
        .collect()
}

/// Writes a two-column `t,h` CSV.
pub fn write_hrf_csv(path: &Path, hrf: &HrfCurve) -> Result<(), DataIoError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| DataIoError::csv(path, e))?;
    w.write_record(["t", "h"]).map_err(|e| DataIoError::csv(path, e))?;
    for (d, v) in hrf.samples().iter().enumerate() {
        w.write_record([hrf.time(d).to_string(), v.to_string()]).map_err(|e| DataIoError::csv(path, e))?;
    }
    w.flush().map_err(|e| DataIoError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), DataIoError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| DataIoError::json(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| DataIoError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, DataIoError> {
    let text = fs::read_to_string(path).map_err(|e| DataIoError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| DataIoError::json(path, e))
}

fn amplitude_file(m: usize, n_conditions: usize) -> String {
    if n_conditions == 1 {
        "amplitudes.csv".to_string()
    } else {
        format!("amplitudes_{m}.csv")
    }
}

/// Writes `dataset` into `dir` (created if needed).
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<(), DataIoError> {
    fs::create_dir_all(dir).map_err(|e| DataIoError::io(dir, e))?;
    let grid = &dataset.grid;
    let n = dataset.n_scans();
    let m = dataset.paradigm.n_conditions();

    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        width: grid.width(),
        height: grid.height(),
        n_scans: n,
        tr: dataset.paradigm.tr,
        dt: dataset.paradigm.dt,
        seed: dataset.seed,
        noise_variance: dataset.noise_variance,
        drift_order: dataset.drift_order,
        n_parcels: dataset.truth.n_parcels(),
        n_conditions: m,
        onsets: dataset.paradigm.onsets.clone(),
        hrfs: dataset.truth.hrfs.iter().map(|h| h.samples().to_vec()).collect(),
        series: SeriesLayout {
            file: SERIES_FILE.into(),
            dtype: "float64".into(),
            byte_order: "little".into(),
            order: "voxel-major".into(),
            shape: [dataset.n_voxels(), n],
        },
    };
    write_json(&dir.join(DATASET_MANIFEST), &manifest)?;

    let ypath = dir.join(SERIES_FILE);
    let file = fs::File::create(&ypath).map_err(|e| DataIoError::io(&ypath, e))?;
    let mut w = BufWriter::new(file);
    for v in dataset.y.iter().flatten() {
        w.write_all(&v.to_le_bytes()).map_err(|e| DataIoError::io(&ypath, e))?;
    }
    w.flush().map_err(|e| DataIoError::io(&ypath, e))?;

    let truth = &dataset.truth;
    write_map_csv(&dir.join("parcels.csv"), grid, &truth.parcel_labels)?;
    let act: Vec<u8> = truth.activation_labels.iter().map(|&q| q as u8).collect();
    write_map_csv(&dir.join("activation.csv"), grid, &act)?;
    for c in 0..m {
        let amps: Vec<f64> = truth.amplitudes.iter().map(|a| a[c]).collect();
        write_map_csv(&dir.join(amplitude_file(c, m)), grid, &amps)?;
    }

    let dpath = dir.join("drift.csv");
    let mut w = csv::Writer::from_path(&dpath).map_err(|e| DataIoError::csv(&dpath, e))?;
    let mut header = vec!["voxel".to_string()];
    header.extend((0..dataset.drift_order).map(|k| format!("l{k}")));
    w.write_record(&header).map_err(|e| DataIoError::csv(&dpath, e))?;
    for (j, l) in dataset.drift_coeffs.iter().enumerate() {
        let mut row = vec![j.to_string()];
        row.extend(l.iter().map(f64::to_string));
        w.write_record(&row).map_err(|e| DataIoError::csv(&dpath, e))?;
    }
    w.flush().map_err(|e| DataIoError::io(&dpath, e))?;

    for (k, h) in truth.hrfs.iter().enumerate() {
        write_hrf_csv(&dir.join(format!("hrf_true_{k}.csv")), h)?;
    }
    Ok(())
}

/// Reads a dataset written by [`save_dataset`].
pub fn load_dataset(dir: &Path) -> Result<Dataset, DataIoError> {
    let mpath = dir.join(DATASET_MANIFEST);
    let manifest: DatasetManifest = read_json(&mpath)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(DataIoError::format(&mpath, format!("unsupported format version {}", manifest.format_version)));
    }
    let grid = Grid2D::new(manifest.width, manifest.height).map_err(|e| DataIoError::format(&mpath, e.to_string()))?;
    let paradigm = Paradigm::new(manifest.onsets, manifest.n_scans, manifest.tr, manifest.dt)
        .map_err(|e| DataIoError::format(&mpath, e.to_string()))?;
    let (j_count, n) = (grid.n_voxels(), manifest.n_scans);
    if manifest.series.shape != [j_count, n] {
        return Err(DataIoError::format(&mpath, "series shape does not match grid and scan count"));
    }

    let ypath = dir.join(&manifest.series.file);
    let bytes = fs::read(&ypath).map_err(|e| DataIoError::io(&ypath, e))?;
    if bytes.len() != 8 * j_count * n {
        return Err(DataIoError::format(&ypath, format!("expected {} bytes, found {}", 8 * j_count * n, bytes.len())));
    }
    let flat: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
    let y = flat.chunks(n).map(<[f64]>::to_vec).collect();

    let m = manifest.n_conditions;
    let parcel_labels: Vec<usize> = read_map_csv(&dir.join("parcels.csv"), &grid)?;
    let act: Vec<u8> = read_map_csv(&dir.join("activation.csv"), &grid)?;
    let mut amplitudes = vec![Vec::with_capacity(m); j_count];
    for c in 0..m {
        let amps: Vec<f64> = read_map_csv(&dir.join(amplitude_file(c, m)), &grid)?;
        for (slot, a) in amplitudes.iter_mut().zip(amps) {
            slot.push(a);
        }
    }

    let dpath = dir.join("drift.csv");
    let mut r = csv::Reader::from_path(&dpath).map_err(|e| DataIoError::csv(&dpath, e))?;
    let mut drift_coeffs = Vec::with_capacity(j_count);
    for rec in r.records() {
        let rec = rec.map_err(|e| DataIoError::csv(&dpath, e))?;
        let row: Result<Vec<f64>, _> = rec.iter().skip(1).map(str::parse).collect();
        drift_coeffs.push(row.map_err(|_| DataIoError::format(&dpath, "non-numeric coefficient"))?);
    }
    if drift_coeffs.len() != j_count {
        return Err(DataIoError::format(&dpath, "one row per voxel expected"));
    }

    let truth = GroundTruth {
        parcel_labels,
        activation_labels: act.into_iter().map(|q| q != 0).collect(),
        amplitudes,
        hrfs: manifest.hrfs.into_iter().map(|s| HrfCurve::new(s, manifest.dt)).collect(),
    };
    truth.validate(&grid, m).map_err(|e| DataIoError::format(&mpath, e.to_string()))?;
    Ok(Dataset {
        grid,
        paradigm,
        y,
        truth,
        drift_order: manifest.drift_order,
        drift_coeffs,
        noise_variance: manifest.noise_variance,
        seed: manifest.seed,
    })
}
