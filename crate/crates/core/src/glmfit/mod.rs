//! Voxel-wise GLM with the canonical HRF and its temporal and dispersion
//! derivatives. The derivative coefficients are the hemodynamic features;
//! the one-sided p-value of the canonical coefficient gives the activation
//! statistic.

mod canonical;
mod design;
mod features;
mod ols;

pub use canonical::{canonical_hrf_basis, CanonicalHrfParams};
pub use design::{build_glm_design, ColumnRole, DesignMatrix};
pub use features::{activation_statistic, extract_features, fit_voxels, FeatureMap, ALPHA_EPS};
pub use ols::{ols_fit, GlmFit, OlsSolver};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GlmError {
    #[error("{n_scans} scans cannot support {n_regressors} regressors")]
    TooFewScans { n_scans: usize, n_regressors: usize },
    #[error("design is rank deficient; collinear columns: {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },
    #[error("non-finite value in GLM input")]
    NonFinite,
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid HRF basis: {0}")]
    InvalidBasis(String),
    #[error("voxel {voxel}: {source}")]
    Voxel { voxel: usize, source: Box<GlmError> },
}

use serde::{Deserialize, Serialize};

use crate::simgen::Paradigm;

/// GLM settings: canonical basis shape and support, and drift order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlmSpec {
    pub drift_order: usize,
    pub hrf_duration: f64,
    pub canonical: CanonicalHrfParams,
}

impl Default for GlmSpec {
    fn default() -> Self {
        Self { drift_order: 4, hrf_duration: 32.0, canonical: CanonicalHrfParams::default() }
    }
}

impl GlmSpec {
    pub fn design(&self, paradigm: &Paradigm) -> Result<DesignMatrix, GlmError> {
        let basis = canonical_hrf_basis(&self.canonical, paradigm.tr, paradigm.dt, self.hrf_duration)?;
        build_glm_design(paradigm, &basis, self.drift_order)
    }
}
