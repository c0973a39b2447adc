//! Spatially constrained agglomerative parcellation.
//!
//! [`igmm_agglomerate`] merges adjacent parcels so as to lose as little
//! classification log-likelihood as possible under a per-parcel two-class
//! Gaussian mixture whose class weights come from the voxel activation
//! statistics. [`spatial_ward`] is the unweighted Ward baseline.

mod igmm;
mod mixture;
mod state;
mod ward;

pub use igmm::{igmm_agglomerate, igmm_agglomerate_logged, merge_gain, IgmmAgglomerator, MergeCandidate, MergeRecord};
pub use mixture::{mixture_loglik, weighted_mixture_fit, MixtureModel, MixtureParams, MIN_CLASS_MASS, RIDGE_FRACTION};
pub use state::{connected_components, labels_connected, ParcelState};
pub use ward::{spatial_ward, spatial_ward_logged};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::glmfit::FeatureMap;
use crate::simgen::Grid2D;

#[derive(Debug, Error)]
pub enum ParcelError {
    #[error("parcels {0} and {1} are not adjacent")]
    NotAdjacent(usize, usize),
    #[error("cannot reach {target} parcels from {available}")]
    InvalidTarget { target: usize, available: usize },
    #[error("{features} feature vectors for {voxels} voxels")]
    SizeMismatch { features: usize, voxels: usize },
    #[error("no adjacent parcels left to merge with {remaining} parcels remaining")]
    Stuck { remaining: usize },
}

/// Parcellation method selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Igmm,
    Sw,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Sw, Method::Igmm];

    pub fn name(self) -> &'static str {
        match self {
            Method::Igmm => "igmm",
            Method::Sw => "sw",
        }
    }

    /// Runs the method, returning the final state and the merge log.
    pub fn run(
        self,
        features: &FeatureMap,
        grid: Grid2D,
        target_parcels: usize,
    ) -> Result<(ParcelState, Vec<MergeRecord>), ParcelError> {
        match self {
            Method::Igmm => igmm_agglomerate_logged(features, grid, target_parcels),
            Method::Sw => spatial_ward_logged(features, grid, target_parcels),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "igmm" => Ok(Method::Igmm),
            "sw" | "ward" => Ok(Method::Sw),
            other => Err(format!("unknown method `{other}` (expected igmm or sw)")),
        }
    }
}
