//! Ordinary least squares through a thin QR factorisation, with the
//! one-sided t-test on the first regressor.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{DesignMatrix, GlmError};

/// Per-voxel fit summary. `t0`/`p0` test `beta[0] > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmFit {
    pub beta: Vec<f64>,
    pub residual_variance: f64,
    pub dof: usize,
    pub t0: f64,
    pub p0: f64,
}

/// A design factorised once and reused for every voxel.
#[derive(Debug, Clone)]
pub struct OlsSolver {
    x: DMatrix<f64>,
    q: DMatrix<f64>,
    r_inv: DMatrix<f64>,
    /// `[(X^T X)^{-1}]_{00}`
    unscaled_var0: f64,
    t_dist: StudentsT,
}

/// Residual norms at or below this fraction of `||y||` count as an exact fit.
const EXACT_FIT_REL: f64 = 1e-12;
/// An exact fit whose first regressor explains less than this fraction of
/// `||y||` has a zero first effect.
const NULL_EFFECT_REL: f64 = 1e-9;

impl OlsSolver {
    pub fn new(design: &DesignMatrix) -> Result<Self, GlmError> {
        Self::from_matrix(design.matrix().clone())
    }

    pub fn from_matrix(x: DMatrix<f64>) -> Result<Self, GlmError> {
        let (n, k) = x.shape();
        if n <= k {
            return Err(GlmError::TooFewScans { n_scans: n, n_regressors: k });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(GlmError::NonFinite);
        }
        let qr = x.clone().qr();
        let q = qr.q();
        let r = qr.r();
        let scale = r.diagonal().amax();
        if r.diagonal().iter().any(|d| d.abs() <= 1e-12 * scale) {
            return Err(GlmError::RankDeficient { columns: vec!["(unnamed)".into()] });
        }
        let r_inv = r
            .solve_upper_triangular(&DMatrix::identity(k, k))
            .ok_or_else(|| GlmError::RankDeficient { columns: vec!["(unnamed)".into()] })?;
        // (X^T X)^{-1} = R^{-1} R^{-T}; entry (0,0) is the squared norm of row 0 of R^{-1}
        let unscaled_var0 = r_inv.row(0).norm_squared();
        let t_dist = StudentsT::new(0.0, 1.0, (n - k) as f64).expect("positive dof");
        Ok(Self { x, q, r_inv, unscaled_var0, t_dist })
    }

    pub fn n_obs(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_params(&self) -> usize {
        self.x.ncols()
    }

    pub fn fit(&self, y: &[f64]) -> Result<GlmFit, GlmError> {
        let (n, k) = self.x.shape();
        if y.len() != n {
            return Err(GlmError::LengthMismatch { expected: n, found: y.len() });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(GlmError::NonFinite);
        }
        let yv = DVector::from_column_slice(y);
        let beta = &self.r_inv * (self.q.transpose() * &yv);
        let resid = &yv - &self.x * &beta;
        let rss = resid.norm_squared();
        let dof = n - k;
        let y_norm = yv.norm();

        let exact = rss.sqrt() <= EXACT_FIT_REL * y_norm;
        let (residual_variance, t0, p0) = if exact {
            // no residual scale: the sign of a non-negligible effect decides
            let effect = beta[0].abs() * self.x.column(0).norm();
            if effect <= NULL_EFFECT_REL * y_norm {
                (0.0, 0.0, 0.5)
            } else if beta[0] > 0.0 {
                (0.0, f64::INFINITY, 0.0)
            } else {
                (0.0, f64::NEG_INFINITY, 1.0)
            }
        } else {
            let s2 = rss / dof as f64;
            let t = beta[0] / (s2 * self.unscaled_var0).sqrt();
            (s2, t, self.t_dist.sf(t))
        };
        Ok(GlmFit { beta: beta.as_slice().to_vec(), residual_variance, dof, t0, p0 })
    }
}

/// Convenience wrapper: factorises `design` and fits one series.
pub fn ols_fit(y: &[f64], design: &DesignMatrix) -> Result<GlmFit, GlmError> {
    OlsSolver::new(design)?.fit(y)
}
