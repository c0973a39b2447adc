//! Two-class Gaussian mixture per parcel, with class responsibilities fixed
//! by the voxel activation statistics instead of being estimated.

use crate::glmfit::FeatureMap;
use nalgebra::{Matrix2, Vector2};

/// Class weight mass below which a class falls back to unweighted moments.
pub const MIN_CLASS_MASS: f64 = 1e-6;
/// Relative covariance ridge, as a fraction of the mean feature variance.
pub const RIDGE_FRACTION: f64 = 1e-4;

/// Mixture parameters of one parcel. Class 0 is "not activated", class 1
/// "activated".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureParams {
    pub lambda: [f64; 2],
    pub mu: [Vector2<f64>; 2],
    pub sigma: [Matrix2<f64>; 2],
}

/// Estimator settings shared by every parcel of one feature map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureModel {
    ridge: f64,
}

impl MixtureModel {
    /// Ridge = `RIDGE_FRACTION` times the mean per-feature variance over all
    /// voxels, or `RIDGE_FRACTION` itself when the features are constant.
    pub fn from_features(features: &FeatureMap) -> Self {
        let n = features.len() as f64;
        let mut var_sum = 0.0;
        for k in 0..2 {
            let mean = features.phi.iter().map(|p| p[k]).sum::<f64>() / n;
            var_sum += features.phi.iter().map(|p| (p[k] - mean).powi(2)).sum::<f64>() / n;
        }
        let mean_var = 0.5 * var_sum;
        let ridge = if mean_var > 0.0 && mean_var.is_finite() { RIDGE_FRACTION * mean_var } else { RIDGE_FRACTION };
        Self { ridge }
    }

    pub fn with_ridge(ridge: f64) -> Self {
        assert!(ridge > 0.0, "ridge must be positive");
        Self { ridge }
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Weighted estimators: `lambda_1` is the mean activation statistic; class
    /// `i` moments weight voxel `j` by `1 - alpha_j` (i = 0) or `alpha_j`
    /// (i = 1). Covariances get `ridge * I` added.
    pub fn fit(&self, members: &[usize], features: &FeatureMap) -> MixtureParams {
        assert!(!members.is_empty(), "cannot fit an empty parcel");
        let n = members.len() as f64;
        let lambda1 = members.iter().map(|&j| features.alpha[j]).sum::<f64>() / n;

        let uniform = weighted_moments(members, features, |_| 1.0);
        let class = |weight: fn(f64) -> f64| {
            let mass: f64 = members.iter().map(|&j| weight(features.alpha[j])).sum();
            let (mu, sigma) = if mass < MIN_CLASS_MASS { uniform } else { weighted_moments(members, features, weight) };
            (mu, sigma + Matrix2::identity() * self.ridge)
        };
        let (mu0, s0) = class(|a| 1.0 - a);
        let (mu1, s1) = class(|a| a);
        MixtureParams { lambda: [1.0 - lambda1, lambda1], mu: [mu0, mu1], sigma: [s0, s1] }
    }
}

/// Weighted mean and (biased, weight-normalised) covariance, two-pass.
fn weighted_moments(
    members: &[usize],
    features: &FeatureMap,
    weight: impl Fn(f64) -> f64,
) -> (Vector2<f64>, Matrix2<f64>) {
    let mut mass = 0.0;
    let mut sum = Vector2::zeros();
    for &j in members {
        let w = weight(features.alpha[j]);
        mass += w;
        sum += Vector2::from(features.phi[j]) * w;
    }
    let mu = sum / mass;
    let mut cov = Matrix2::zeros();
    for &j in members {
        let w = weight(features.alpha[j]);
        let d = Vector2::from(features.phi[j]) - mu;
        cov += d * d.transpose() * w;
    }
    (mu, cov / mass)
}

/// Fits a parcel with the ridge implied by the whole feature map.
pub fn weighted_mixture_fit(members: &[usize], features: &FeatureMap) -> MixtureParams {
    MixtureModel::from_features(features).fit(members, features)
}

/// Bivariate normal with cached inverse and log-normaliser.
#[derive(Debug, Clone, Copy)]
struct Gaussian2 {
    mu: Vector2<f64>,
    inv: Matrix2<f64>,
    log_norm: f64,
}

impl Gaussian2 {
    fn new(mu: Vector2<f64>, sigma: &Matrix2<f64>) -> Option<Self> {
        let det = sigma.determinant();
        if !(det > 0.0 && sigma[(0, 0)] > 0.0) {
            return None;
        }
        let inv = sigma.try_inverse()?;
        let log_norm = -(2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln();
        Some(Self { mu, inv, log_norm })
    }

    fn log_density(&self, x: &Vector2<f64>) -> f64 {
        let d = x - self.mu;
        self.log_norm - 0.5 * (d.transpose() * self.inv * d)[(0, 0)]
    }
}

/// Sum over `members` of the log mixture density, via log-sum-exp.
/// Classes with zero weight are skipped.
///
/// Panics if a covariance with positive weight is not positive definite,
/// which the ridge rules out for parameters produced by [`MixtureModel::fit`].
pub fn mixture_loglik(members: &[usize], params: &MixtureParams, features: &FeatureMap) -> f64 {
    let comps: Vec<(f64, Gaussian2)> = (0..2)
        .filter(|&i| params.lambda[i] > 0.0)
        .map(|i| {
            let g =
                Gaussian2::new(params.mu[i], &params.sigma[i]).expect("mixture covariance must be positive definite");
            (params.lambda[i].ln(), g)
        })
        .collect();
    members
        .iter()
        .map(|&j| {
            let x = Vector2::from(features.phi[j]);
            let terms: Vec<f64> = comps.iter().map(|(lw, g)| lw + g.log_density(&x)).collect();
            let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
        })
        .sum()
}
