//! Versioned experiment configuration, stored as TOML.
//!
//! Every section may be omitted and then takes its default; unknown keys
//! are rejected. `version` is mandatory.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::eval::{ExperimentSpec, McSpec, RefitSettings};
use crate::glmfit::GlmSpec;
use crate::parcellation::Method;
use crate::simgen::{DriftSpec, PhantomSpec};

pub const CONFIG_VERSION: u32 = 1;

/// Noise level of the single dataset produced by the `simulate` stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub noise_variance: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { noise_variance: 1.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParcellationConfig {
    pub methods: Vec<Method>,
    pub target_parcels: usize,
}

impl Default for ParcellationConfig {
    fn default() -> Self {
        Self { methods: Method::ALL.to_vec(), target_parcels: 4 }
    }
}

/// Monte Carlo sweep. Run seeds derive from the top-level `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub noise_grid: Vec<f64>,
    pub runs: usize,
    /// Also refit HRFs in every run and report the detection error.
    pub refit: bool,
    pub record_timing: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        let d = McSpec::default();
        Self { noise_grid: d.noise_grid, runs: d.runs, refit: false, record_timing: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub phantom: PhantomSpec,
    #[serde(default)]
    pub drift: DriftSpec,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub glm: GlmSpec,
    #[serde(default)]
    pub parcellation: ParcellationConfig,
    #[serde(default)]
    pub refit: RefitSettings,
    #[serde(default)]
    pub mc: McConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: 0,
            phantom: PhantomSpec::default(),
            drift: DriftSpec::default(),
            simulate: SimulateConfig::default(),
            glm: GlmSpec::default(),
            parcellation: ParcellationConfig::default(),
            refit: RefitSettings::default(),
            mc: McConfig::default(),
        }
    }
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> PipelineError {
    PipelineError::Config(format!("{field}: {msg}"))
}

impl ExperimentConfig {
    /// Parses and validates a TOML document.
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let cfg: Self = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            PipelineError::Config(msg) => PipelineError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable in TOML")
    }

    /// Field-level checks beyond what the schema enforces.
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.version != CONFIG_VERSION {
            return Err(invalid(
                "version",
                format!("unsupported schema version {} (expected {CONFIG_VERSION})", self.version),
            ));
        }
        self.phantom.validate().map_err(|e| invalid("phantom", e))?;
        self.phantom.build(self.seed).map_err(|e| invalid("phantom", e))?;
        let voxels = self.phantom.width * self.phantom.height;
        let noise_ok = |v: f64| v >= 0.0 && v.is_finite();
        if !noise_ok(self.simulate.noise_variance) {
            return Err(invalid("simulate.noise_variance", "must be finite and non-negative"));
        }
        if !noise_ok(self.drift.variance) {
            return Err(invalid("drift.variance", "must be finite and non-negative"));
        }
        if self.parcellation.methods.is_empty() {
            return Err(invalid("parcellation.methods", "at least one method is required"));
        }
        let k = self.parcellation.target_parcels;
        if k == 0 || k > voxels {
            return Err(invalid("parcellation.target_parcels", format!("must be in 1..={voxels}")));
        }
        if self.mc.runs == 0 {
            return Err(invalid("mc.runs", "must be at least 1"));
        }
        if self.mc.noise_grid.is_empty() || !self.mc.noise_grid.iter().all(|&v| noise_ok(v)) {
            return Err(invalid("mc.noise_grid", "needs at least one finite, non-negative variance"));
        }
        if !(self.refit.tol >= 0.0) || self.refit.max_iters == 0 {
            return Err(invalid("refit", "tol must be non-negative and max_iters positive"));
        }
        Ok(())
    }

    pub fn experiment(&self) -> ExperimentSpec {
        ExperimentSpec {
            phantom: self.phantom.clone(),
            drift: self.drift,
            glm: self.glm,
            target_parcels: self.parcellation.target_parcels,
            refit: self.mc.refit.then_some(self.refit),
        }
    }

    pub fn mc_spec(&self) -> McSpec {
        McSpec {
            noise_grid: self.mc.noise_grid.clone(),
            runs: self.mc.runs,
            base_seed: self.seed,
            record_timing: self.mc.record_timing,
        }
    }
}
