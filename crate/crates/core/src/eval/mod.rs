//! Scoring: mutual information against ground truth, detection error, a
//! parcel-wise HRF refit and the Monte Carlo driver.

mod mi;
mod monte_carlo;
mod mse;
mod refit;

pub use mi::{entropy, mutual_information, ContingencyTable};
pub use monte_carlo::{
    cell_seed, mean_std, monte_carlo, run_cell, CellOutcome, ExperimentSpec, McReport, McSpec, MethodOutcome,
    NoiseLevelReport,
};
pub use mse::detection_mse;
pub use refit::{als_hrf_refit, als_hrf_refit_lenient, HrfRefit, RefitSettings};

use thiserror::Error;

use crate::glmfit::GlmError;
use crate::parcellation::ParcelError;
use crate::simgen::SimError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("true amplitudes are all zero; the relative error is undefined")]
    ZeroTruth,
    #[error("parcel {parcel}: FIR system is singular (insufficient excitation)")]
    SingularHrfSystem { parcel: usize },
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Glm(#[from] GlmError),
    #[error(transparent)]
    Parcel(#[from] ParcelError),
    #[error("noise variance {sigma2}, run {run}: {source}")]
    Cell { sigma2: f64, run: usize, source: Box<EvalError> },
}
