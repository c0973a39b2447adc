//! Synthetic BOLD datasets following a regional generative model: every
//! voxel of a hemodynamic territory shares one HRF, scaled by a per-voxel
//! response amplitude, on top of cosine drift and white noise.

mod grid;
mod hrf;
pub mod io;
mod paradigm;
mod phantom;
mod synth;

pub use grid::Grid2D;
pub use hrf::{build_bezier_hrf, BezierHrfSpec, HrfCurve};
pub use paradigm::{build_stim_matrix, Paradigm};
pub use phantom::{default_hrf_specs, default_phantom, AmplitudeLaw, OnsetDesign, ParadigmSpec, PhantomSpec};
pub use synth::{parcel_responses, synthesize_dataset, Dataset, DriftSpec, GroundTruth};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid grid {width}x{height}: both dimensions must be positive")]
    InvalidGrid { width: usize, height: usize },
    #[error("invalid HRF specification: {0}")]
    InvalidHrfSpec(String),
    #[error("invalid sampling period {0}")]
    InvalidSamplingPeriod(f64),
    #[error("HRF duration {duration} s is not a multiple of dt = {dt} s")]
    DurationNotOnGrid { duration: f64, dt: f64 },
    #[error("Bezier segment {segment} has a non-invertible time parameterisation; reduce the peak/undershoot widths")]
    NonMonotoneBezier { segment: usize },
    #[error("invalid paradigm: {0}")]
    InvalidParadigm(String),
    #[error("invalid ground truth: {0}")]
    InvalidTruth(String),
    #[error("HRF of parcel {parcel} is sampled at {hrf_dt} s but the paradigm uses dt = {paradigm_dt} s")]
    HrfSamplingMismatch { parcel: usize, hrf_dt: f64, paradigm_dt: f64 },
    #[error("invalid noise variance {0}")]
    InvalidNoise(f64),
    #[error("invalid drift specification: {0}")]
    InvalidDrift(String),
}
