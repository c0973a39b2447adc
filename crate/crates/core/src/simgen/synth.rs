//! Regional BOLD model: amplitude-scaled stimulus convolution with the
//! parcel HRF, plus cosine drift and white Gaussian noise.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{build_stim_matrix, Grid2D, HrfCurve, Paradigm, SimError};
use crate::{drift::dct_basis, par, seed};

/// Ground-truth generative parameters of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Hemodynamic territory of each voxel, in `0..n_parcels`.
    pub parcel_labels: Vec<usize>,
    pub activation_labels: Vec<bool>,
    /// `amplitudes[j][m]`: response amplitude of voxel `j` for condition `m`.
    pub amplitudes: Vec<Vec<f64>>,
    /// One HRF per territory.
    pub hrfs: Vec<HrfCurve>,
}

impl GroundTruth {
    pub fn n_parcels(&self) -> usize {
        self.hrfs.len()
    }

    pub fn validate(&self, grid: &Grid2D, n_conditions: usize) -> Result<(), SimError> {
        let j = grid.n_voxels();
        let bad = |msg: String| Err(SimError::InvalidTruth(msg));
        if self.parcel_labels.len() != j || self.activation_labels.len() != j || self.amplitudes.len() != j {
            return bad(format!("per-voxel maps must have {j} entries"));
        }
        let g = self.n_parcels();
        let mut seen = vec![false; g];
        for &p in &self.parcel_labels {
            if p >= g {
                return bad(format!("parcel label {p} has no HRF ({g} HRFs)"));
            }
            seen[p] = true;
        }
        if let Some(p) = seen.iter().position(|s| !s) {
            return bad(format!("parcel {p} has no voxels"));
        }
        for (v, (a, &q)) in self.amplitudes.iter().zip(&self.activation_labels).enumerate() {
            if a.len() != n_conditions {
                return bad(format!("voxel {v}: {} amplitudes for {n_conditions} conditions", a.len()));
            }
            if !q && a.iter().any(|&x| x != 0.0) {
                return bad(format!("voxel {v} is inactive but has a non-zero amplitude"));
            }
        }
        Ok(())
    }
}

/// Drift prior: `order` cosine regressors (including the constant) with
/// i.i.d. zero-mean Gaussian coefficients of variance `variance`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftSpec {
    pub order: usize,
    pub variance: f64,
}

impl Default for DriftSpec {
    fn default() -> Self {
        Self { order: 4, variance: 11.0 }
    }
}

/// A simulated acquisition together with everything used to generate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub grid: Grid2D,
    pub paradigm: Paradigm,
    /// `y[j]`: BOLD series of voxel `j`, one value per scan.
    pub y: Vec<Vec<f64>>,
    pub truth: GroundTruth,
    pub drift_order: usize,
    pub drift_coeffs: Vec<Vec<f64>>,
    pub noise_variance: f64,
    pub seed: u64,
}

impl Dataset {
    pub fn n_voxels(&self) -> usize {
        self.y.len()
    }

    pub fn n_scans(&self) -> usize {
        self.paradigm.n_scans
    }
}

/// Noise-free task response `X^m h` of every (parcel, condition) pair.
pub fn parcel_responses(truth: &GroundTruth, paradigm: &Paradigm) -> Result<Vec<Vec<DVector<f64>>>, SimError> {
    truth
        .hrfs
        .iter()
        .enumerate()
        .map(|(g, h)| {
            if (h.dt() - paradigm.dt).abs() > 1e-12 {
                return Err(SimError::HrfSamplingMismatch { parcel: g, hrf_dt: h.dt(), paradigm_dt: paradigm.dt });
            }
            let hv = DVector::from_column_slice(h.samples());
            (0..paradigm.n_conditions()).map(|m| Ok(build_stim_matrix(paradigm, m, h.max_lag())? * &hv)).collect()
        })
        .collect()
}

/// Generates `y_j = sum_m a_j^m X^m h_parcel(j) + P l_j + b_j` for every voxel.
///
/// Each voxel draws its drift coefficients and then its noise from a private
/// stream keyed by `(seed, j)`, so the output is independent of evaluation
/// order. Noise is drawn as standard normals scaled by the noise standard
/// deviation, so datasets that differ only in `noise_variance` share one
/// noise realisation up to scale.
pub fn synthesize_dataset(
    grid: Grid2D,
    truth: GroundTruth,
    paradigm: Paradigm,
    drift: DriftSpec,
    noise_variance: f64,
    seed: u64,
) -> Result<Dataset, SimError> {
    paradigm.validate()?;
    truth.validate(&grid, paradigm.n_conditions())?;
    if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
        return Err(SimError::InvalidNoise(noise_variance));
    }
    if !(drift.variance >= 0.0 && drift.variance.is_finite()) || drift.order > paradigm.n_scans {
        return Err(SimError::InvalidDrift(format!("{drift:?}")));
    }
    let responses = parcel_responses(&truth, &paradigm)?;
    let n = paradigm.n_scans;
    let basis: DMatrix<f64> = dct_basis(n, drift.order);
    let drift_sd = drift.variance.sqrt();
    let noise_sd = noise_variance.sqrt();

    let per_voxel = par::map_range(grid.n_voxels(), |j| {
        let mut rng = seed::rng(seed, &[seed::tag::VOXEL, j as u64]);
        let coeffs: Vec<f64> = (0..drift.order)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                drift_sd * z
            })
            .collect();
        let mut y = basis.clone() * DVector::from_column_slice(&coeffs);
        for (m, &a) in truth.amplitudes[j].iter().enumerate() {
            if a != 0.0 {
                y.axpy(a, &responses[truth.parcel_labels[j]][m], 1.0);
            }
        }
        for v in y.iter_mut() {
            let e: f64 = StandardNormal.sample(&mut rng);
            *v += noise_sd * e;
        }
        (y.as_slice().to_vec(), coeffs)
    });
    let (y, drift_coeffs) = per_voxel.into_iter().unzip();
    Ok(Dataset { grid, paradigm, y, truth, drift_order: drift.order, drift_coeffs, noise_variance, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::{build_bezier_hrf, default_phantom, BezierHrfSpec};

    fn hrf() -> HrfCurve {
        build_bezier_hrf(
            &BezierHrfSpec {
                time_to_peak: 5.0,
                peak_amplitude: 1.0,
                time_to_undershoot: 11.0,
                undershoot_amplitude: -0.2,
                duration: 25.0,
                peak_width: 3.0,
                undershoot_width: 3.0,
            },
            0.5,
        )
        .unwrap()
    }

    fn one_parcel_truth(grid: &Grid2D, amps: &[f64]) -> GroundTruth {
        GroundTruth {
            parcel_labels: vec![0; grid.n_voxels()],
            activation_labels: amps.iter().map(|&a| a != 0.0).collect(),
            amplitudes: amps.iter().map(|&a| vec![a]).collect(),
            hrfs: vec![hrf()],
        }
    }

    const NO_DRIFT: DriftSpec = DriftSpec { order: 4, variance: 0.0 };

    #[test]
    fn all_zero_terms_give_zero_series() {
        let grid = Grid2D::new(3, 2).unwrap();
        let p = Paradigm::new(vec![vec![2.0, 9.5]], 40, 1.0, 0.5).unwrap();
        let ds = synthesize_dataset(grid, one_parcel_truth(&grid, &[0.0; 6]), p, NO_DRIFT, 0.0, 1).unwrap();
        assert!(ds.y.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_direct_convolution() {
        let grid = Grid2D::new(1, 1).unwrap();
        let onset = 3.0;
        let p = Paradigm::new(vec![vec![onset]], 40, 1.0, 0.5).unwrap();
        let ds = synthesize_dataset(grid, one_parcel_truth(&grid, &[2.0]), p, NO_DRIFT, 0.0, 1).unwrap();
        let h = hrf();
        for (n, &v) in ds.y[0].iter().enumerate() {
            // y(t_n) = 2 h(t_n - onset) on the fine lattice
            let lag = (n as f64 - onset) / 0.5;
            let want =
                if lag >= 0.0 && (lag as usize) < h.samples().len() { 2.0 * h.samples()[lag as usize] } else { 0.0 };
            assert!((v - want).abs() < 1e-14, "n={n}: {v} vs {want}");
        }
    }

    #[test]
    fn model_is_linear_in_amplitudes() {
        let grid = Grid2D::new(2, 2).unwrap();
        let p = Paradigm::new(vec![vec![1.0, 6.5, 14.0]], 50, 1.0, 0.5).unwrap();
        let run =
            |a: &[f64]| synthesize_dataset(grid, one_parcel_truth(&grid, a), p.clone(), NO_DRIFT, 0.0, 9).unwrap().y;
        let a = [1.0, 0.0, 2.5, -0.5];
        let b = [0.25, 3.0, 0.0, 1.5];
        let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let (ya, yb, yab) = (run(&a), run(&b), run(&ab));
        for j in 0..4 {
            for n in 0..50 {
                assert!((ya[j][n] + yb[j][n] - yab[j][n]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn noise_variance_is_calibrated() {
        let (grid, truth, paradigm) = default_phantom(2).unwrap();
        let clean = synthesize_dataset(grid, truth.clone(), paradigm.clone(), DriftSpec::default(), 0.0, 17).unwrap();
        for s2 in [0.5, 1.5, 5.0] {
            let noisy =
                synthesize_dataset(grid, truth.clone(), paradigm.clone(), DriftSpec::default(), s2, 17).unwrap();
            let resid: Vec<f64> = noisy.y.iter().flatten().zip(clean.y.iter().flatten()).map(|(a, b)| a - b).collect();
            let n = resid.len() as f64;
            let var = resid.iter().map(|e| e * e).sum::<f64>() / n;
            // standard error of a Gaussian variance estimate
            let se = s2 * (2.0 / n).sqrt();
            assert!((var - s2).abs() < 3.0 * se, "sigma2={s2}: {var}");
        }
    }

    #[test]
    fn deterministic_and_order_free() {
        let (grid, truth, paradigm) = default_phantom(4).unwrap();
        let a = synthesize_dataset(grid, truth.clone(), paradigm.clone(), DriftSpec::default(), 1.5, 8).unwrap();
        let b = synthesize_dataset(grid, truth, paradigm, DriftSpec::default(), 1.5, 8).unwrap();
        assert_eq!(a, b);
        assert!(a.y.iter().all(|s| s.len() == a.n_scans()));
    }

    #[test]
    fn rejects_dt_mismatch() {
        let grid = Grid2D::new(1, 1).unwrap();
        let p = Paradigm::new(vec![vec![1.0]], 40, 1.0, 0.25).unwrap();
        let err = synthesize_dataset(grid, one_parcel_truth(&grid, &[1.0]), p, NO_DRIFT, 0.0, 1).unwrap_err();
        assert!(matches!(err, SimError::HrfSamplingMismatch { parcel: 0, .. }));
    }
}
