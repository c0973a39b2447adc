use serde::{Deserialize, Serialize};

use super::{DesignMatrix, GlmError, GlmFit, OlsSolver};
use crate::par;
use crate::simgen::Dataset;

/// Lower/upper clamp margin on the activation statistic.
pub const ALPHA_EPS: f64 = 1e-6;

/// Hemodynamic features: `phi[j]` holds the temporal- and
/// dispersion-derivative estimates of voxel `j`, `alpha[j] = 1 - p0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub phi: Vec<[f64; 2]>,
    pub alpha: Vec<f64>,
}

impl FeatureMap {
    pub fn new(phi: Vec<[f64; 2]>, alpha: Vec<f64>) -> Self {
        assert_eq!(phi.len(), alpha.len(), "one alpha per feature vector");
        Self { phi, alpha }
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    /// Features from per-voxel fits whose design puts the canonical, temporal
    /// and dispersion regressors of the first condition in columns 0..3.
    pub fn from_fits(fits: &[GlmFit]) -> Self {
        let phi = fits.iter().map(|f| [f.beta[1], f.beta[2]]).collect();
        let alpha = fits.iter().map(|f| activation_statistic(f.p0)).collect();
        Self { phi, alpha }
    }
}

pub fn activation_statistic(p0: f64) -> f64 {
    (1.0 - p0).clamp(ALPHA_EPS, 1.0 - ALPHA_EPS)
}

/// Fits every voxel of `dataset` against `design`.
pub fn fit_voxels(dataset: &Dataset, design: &DesignMatrix) -> Result<Vec<GlmFit>, GlmError> {
    if design.n_rows() != dataset.n_scans() {
        return Err(GlmError::LengthMismatch { expected: design.n_rows(), found: dataset.n_scans() });
    }
    let solver = OlsSolver::new(design)?;
    par::map_slice(&dataset.y, |y| solver.fit(y))
        .into_iter()
        .enumerate()
        .map(|(j, r)| r.map_err(|e| GlmError::Voxel { voxel: j, source: Box::new(e) }))
        .collect()
}

pub fn extract_features(dataset: &Dataset, design: &DesignMatrix) -> Result<FeatureMap, GlmError> {
    Ok(FeatureMap::from_fits(&fit_voxels(dataset, design)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::dct_basis;
    use crate::glmfit::GlmSpec;
    use crate::seed;
    use crate::simgen::{default_phantom, synthesize_dataset, DriftSpec, Paradigm};
    use nalgebra::DVector;
    use rand_distr::{Distribution, StandardNormal};

    fn paradigm() -> Paradigm {
        let (_, _, p) = default_phantom(0).unwrap();
        p
    }

    #[test]
    fn null_p_values_are_uniform() {
        let p = paradigm();
        let solver = OlsSolver::new(&GlmSpec::default().design(&p).unwrap()).unwrap();
        let mut rng = seed::rng(1, &[seed::tag::NOISE_TEST]);
        let mut ps: Vec<f64> = (0..10_000)
            .map(|_| {
                let y: Vec<f64> = (0..p.n_scans).map(|_| StandardNormal.sample(&mut rng)).collect();
                solver.fit(&y).unwrap().p0
            })
            .collect();
        ps.sort_by(f64::total_cmp);
        let n = ps.len() as f64;
        let ks =
            ps.iter().enumerate().map(|(i, &u)| ((i + 1) as f64 / n - u).max(u - i as f64 / n)).fold(0.0, f64::max);
        assert!(ks < 0.02, "KS = {ks}");
    }

    #[test]
    fn drift_does_not_move_task_effects() {
        let p = paradigm();
        let design = GlmSpec::default().design(&p).unwrap();
        let solver = OlsSolver::new(&design).unwrap();
        let mut rng = seed::rng(2, &[seed::tag::NOISE_TEST]);
        let y: Vec<f64> = (0..p.n_scans).map(|_| StandardNormal.sample(&mut rng)).collect();
        let drift = dct_basis(p.n_scans, 4) * DVector::from_vec(vec![30.0, -4.0, 2.5, 7.0]);
        let y2: Vec<f64> = y.iter().zip(drift.iter()).map(|(a, b)| a + b).collect();
        let (a, b) = (solver.fit(&y).unwrap(), solver.fit(&y2).unwrap());
        for k in 0..3 {
            assert!((a.beta[k] - b.beta[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn strong_activation_is_detected() {
        let (grid, mut truth, paradigm) = default_phantom(0).unwrap();
        for (a, q) in truth.amplitudes.iter_mut().zip(truth.activation_labels.iter_mut()) {
            *q = true;
            a[0] = 1.8;
        }
        let ds = synthesize_dataset(grid, truth, paradigm, DriftSpec::default(), 0.5, 3).unwrap();
        let f = extract_features(&ds, &GlmSpec::default().design(&ds.paradigm).unwrap()).unwrap();
        assert!(f.alpha.iter().all(|&a| a > 0.99));
    }

    #[test]
    fn constant_series_is_undecided() {
        let (grid, mut truth, paradigm) = default_phantom(0).unwrap();
        truth.amplitudes.iter_mut().for_each(|a| a[0] = 0.0);
        truth.activation_labels.iter_mut().for_each(|q| *q = false);
        let drift = DriftSpec { order: 4, variance: 0.0 };
        let ds = synthesize_dataset(grid, truth, paradigm, drift, 0.0, 3).unwrap();
        let f = extract_features(&ds, &GlmSpec::default().design(&ds.paradigm).unwrap()).unwrap();
        assert!(f.phi.iter().all(|p| p == &[0.0, 0.0]));
        assert!(f.alpha.iter().all(|&a| a == 0.5));
    }

    #[test]
    fn alpha_is_clamped() {
        assert_eq!(activation_statistic(0.0), 1.0 - ALPHA_EPS);
        assert_eq!(activation_statistic(1.0), ALPHA_EPS);
        assert_eq!(activation_statistic(0.25), 0.75);
    }
}
