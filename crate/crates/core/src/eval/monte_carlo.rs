//! Monte Carlo comparison of the parcellation methods over a noise sweep.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{als_hrf_refit_lenient, detection_mse, mutual_information, EvalError, RefitSettings};
use crate::glmfit::{extract_features, FeatureMap, GlmSpec};
use crate::parcellation::Method;
use crate::simgen::{synthesize_dataset, Dataset, DriftSpec, PhantomSpec};
use crate::{par, seed};

/// Everything needed to simulate and score one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub phantom: PhantomSpec,
    pub drift: DriftSpec,
    pub glm: GlmSpec,
    pub target_parcels: usize,
    /// When set, each run also refits HRFs and amplitudes under every
    /// method's parcellation and reports the detection error.
    pub refit: Option<RefitSettings>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            phantom: PhantomSpec::default(),
            drift: DriftSpec::default(),
            glm: GlmSpec::default(),
            target_parcels: 4,
            refit: Some(RefitSettings::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSpec {
    pub noise_grid: Vec<f64>,
    pub runs: usize,
    pub base_seed: u64,
    /// Wall-clock timings make reports non-reproducible, so they are opt-in.
    #[serde(default)]
    pub record_timing: bool,
}

impl Default for McSpec {
    fn default() -> Self {
        Self { noise_grid: vec![0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0], runs: 100, base_seed: 0, record_timing: false }
    }
}

/// Seed of run `run` at noise index `sigma_index`.
pub fn cell_seed(base_seed: u64, sigma_index: usize, run: usize) -> u64 {
    seed::derive(base_seed, &[seed::tag::RUN, sigma_index as u64, run as u64])
}

/// Score of one method on one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub method: Method,
    /// Dense parcel labels, `0..target_parcels`.
    pub labels: Vec<usize>,
    pub mi: f64,
    pub mse: Option<f64>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub sigma2: f64,
    pub seed: u64,
    pub dataset: Dataset,
    pub features: FeatureMap,
    pub methods: Vec<MethodOutcome>,
}

impl CellOutcome {
    pub fn method(&self, m: Method) -> &MethodOutcome {
        self.methods.iter().find(|o| o.method == m).expect("every method is run")
    }
}

/// Simulates one dataset with noise variance `sigma2` from `seed`, extracts
/// features and runs every method on it.
pub fn run_cell(spec: &ExperimentSpec, sigma2: f64, seed: u64) -> Result<CellOutcome, EvalError> {
    let (grid, truth, paradigm) = spec.phantom.build(seed)?;
    let dataset = synthesize_dataset(grid, truth, paradigm, spec.drift, sigma2, seed)?;
    let design = spec.glm.design(&dataset.paradigm)?;
    let features = extract_features(&dataset, &design)?;
    let a_true: Vec<f64> = dataset.truth.amplitudes.iter().map(|a| a[0]).collect();
    let methods = Method::ALL
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let (state, _) = method.run(&features, grid, spec.target_parcels)?;
            let wall_ms = start.elapsed().as_secs_f64() * 1e3;
            let labels = state.dense_labels();
            let mi = mutual_information(&labels, &dataset.truth.parcel_labels)?;
            let mse = match &spec.refit {
                Some(settings) => {
                    let refit = als_hrf_refit_lenient(&dataset, &labels, settings)?;
                    Some(detection_mse(&refit.condition_amplitudes(0), &a_true)?)
                }
                None => None,
            };
            Ok(MethodOutcome { method, labels, mi, mse, wall_ms })
        })
        .collect::<Result<_, EvalError>>()?;
    Ok(CellOutcome { sigma2, seed, dataset, features, methods })
}

/// Per-method, per-noise-level samples and summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseLevelReport {
    pub sigma2: f64,
    pub mi: Vec<f64>,
    pub mi_mean: f64,
    pub mi_std: f64,
    pub mi_stderr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub noise_grid: Vec<f64>,
    pub runs: usize,
    pub base_seed: u64,
    pub target_parcels: usize,
    /// `seeds[s][r]`: dataset seed of run `r` at noise index `s`.
    pub seeds: Vec<Vec<u64>>,
    pub methods: BTreeMap<String, Vec<NoiseLevelReport>>,
}

/// Sample mean and standard deviation (n - 1 denominator; 0 for one sample).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs `mc.runs` datasets at every noise level. Cells are independent and
/// seeded by position, so the report does not depend on scheduling.
pub fn monte_carlo(spec: &ExperimentSpec, mc: &McSpec) -> Result<McReport, EvalError> {
    if mc.runs == 0 {
        return Err(EvalError::InvalidSettings("at least one run is required".into()));
    }
    if mc.noise_grid.is_empty() {
        return Err(EvalError::InvalidSettings("the noise grid is empty".into()));
    }
    let n_runs = mc.runs;
    let cells = par::map_range(mc.noise_grid.len() * n_runs, |i| {
        let (s, r) = (i / n_runs, i % n_runs);
        let sigma2 = mc.noise_grid[s];
        run_cell(spec, sigma2, cell_seed(mc.base_seed, s, r)).map(|c| c.methods).map_err(|e| EvalError::Cell {
            sigma2,
            run: r,
            source: Box::new(e),
        })
    });
    let cells: Vec<Vec<MethodOutcome>> = cells.into_iter().collect::<Result<_, _>>()?;

    let mut methods = BTreeMap::new();
    for method in Method::ALL {
        let levels = mc
            .noise_grid
            .iter()
            .enumerate()
            .map(|(s, &sigma2)| {
                let outs: Vec<&MethodOutcome> = cells[s * n_runs..(s + 1) * n_runs]
                    .iter()
                    .map(|c| c.iter().find(|o| o.method == method).expect("every method is run"))
                    .collect();
                let mi: Vec<f64> = outs.iter().map(|o| o.mi).collect();
                let (mi_mean, mi_std) = mean_std(&mi);
                let mse: Option<Vec<f64>> = outs.iter().map(|o| o.mse).collect();
                let mse_mean = mse.as_ref().map(|v| mean_std(v).0);
                NoiseLevelReport {
                    sigma2,
                    mi_stderr: mi_std / (n_runs as f64).sqrt(),
                    mi,
                    mi_mean,
                    mi_std,
                    mse,
                    mse_mean,
                    wall_ms: mc.record_timing.then(|| outs.iter().map(|o| o.wall_ms).collect()),
                }
            })
            .collect();
        methods.insert(method.name().to_string(), levels);
    }
    let seeds =
        (0..mc.noise_grid.len()).map(|s| (0..n_runs).map(|r| cell_seed(mc.base_seed, s, r)).collect()).collect();
    Ok(McReport {
        noise_grid: mc.noise_grid.clone(),
        runs: n_runs,
        base_seed: mc.base_seed,
        target_parcels: spec.target_parcels,
        seeds,
        methods,
    })
}
