use std::fmt;

use nalgebra::DMatrix;

use super::GlmError;
use crate::drift::dct_basis;
use crate::simgen::{HrfCurve, Paradigm};

/// What a design column models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnRole {
    Canonical { condition: usize },
    TemporalDerivative { condition: usize },
    DispersionDerivative { condition: usize },
    Drift { order: usize },
}

impl fmt::Display for ColumnRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Canonical { condition } => write!(f, "canonical[{condition}]"),
            Self::TemporalDerivative { condition } => write!(f, "temporal_derivative[{condition}]"),
            Self::DispersionDerivative { condition } => write!(f, "dispersion_derivative[{condition}]"),
            Self::Drift { order } => write!(f, "drift[{order}]"),
        }
    }
}

/// GLM design: for each condition the paradigm convolved with `h`, `h'` and
/// `h''`, followed by the cosine drift regressors. Full column rank.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    columns: DMatrix<f64>,
    roles: Vec<ColumnRole>,
}

impl DesignMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn roles(&self) -> &[ColumnRole] {
        &self.roles
    }

    pub fn n_rows(&self) -> usize {
        self.columns.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.ncols()
    }

    /// Column index of a role, if present.
    pub fn column_of(&self, role: ColumnRole) -> Option<usize> {
        self.roles.iter().position(|&r| r == role)
    }
}

/// Convolves the fine-grid impulse train with `kernel` and keeps the values
/// at scan times.
fn convolve_at_scans(paradigm: &Paradigm, condition: usize, kernel: &[f64]) -> Vec<f64> {
    let train = paradigm.impulse_train(condition);
    let os = paradigm.oversampling();
    let events: Vec<usize> = train.iter().enumerate().filter_map(|(k, &v)| (v != 0.0).then_some(k)).collect();
    (0..paradigm.n_scans)
        .map(|n| {
            let k = n * os;
            events.iter().filter(|&&e| e <= k && k - e < kernel.len()).map(|&e| kernel[k - e]).sum()
        })
        .collect()
}

/// Indices of columns lying (numerically) in the span of the columns before
/// them, found by modified Gram-Schmidt.
fn collinear_columns(x: &DMatrix<f64>) -> Vec<usize> {
    const REL_TOL: f64 = 1e-10;
    let mut basis: Vec<nalgebra::DVector<f64>> = Vec::new();
    let mut bad = Vec::new();
    for c in 0..x.ncols() {
        let col = x.column(c).into_owned();
        let norm0 = col.norm();
        let mut v = col;
        for q in &basis {
            let proj = q.dot(&v);
            v.axpy(-proj, q, 1.0);
        }
        let norm = v.norm();
        if norm0 == 0.0 || norm <= REL_TOL * norm0 {
            bad.push(c);
        } else {
            basis.push(v / norm);
        }
    }
    bad
}

/// Builds the design for every condition of `paradigm` from the canonical
/// basis `(h, h', h'')` and `drift_order` cosine regressors.
pub fn build_glm_design(
    paradigm: &Paradigm,
    basis: &[HrfCurve; 3],
    drift_order: usize,
) -> Result<DesignMatrix, GlmError> {
    for b in basis {
        if (b.dt() - paradigm.dt).abs() > 1e-12 {
            return Err(GlmError::InvalidBasis(format!(
                "basis sampled at {} s, paradigm at {} s",
                b.dt(),
                paradigm.dt
            )));
        }
    }
    let n = paradigm.n_scans;
    let m = paradigm.n_conditions();
    let k = 3 * m + drift_order;
    if n <= k {
        return Err(GlmError::TooFewScans { n_scans: n, n_regressors: k });
    }
    let mut columns = DMatrix::zeros(n, k);
    let mut roles = Vec::with_capacity(k);
    for c in 0..m {
        let kinds = [
            ColumnRole::Canonical { condition: c },
            ColumnRole::TemporalDerivative { condition: c },
            ColumnRole::DispersionDerivative { condition: c },
        ];
        for (kernel, role) in basis.iter().zip(kinds) {
            let col = convolve_at_scans(paradigm, c, kernel.samples());
            columns.column_mut(roles.len()).copy_from_slice(&col);
            roles.push(role);
        }
    }
    let drift = dct_basis(n, drift_order);
    for o in 0..drift_order {
        columns.column_mut(roles.len()).copy_from(&drift.column(o));
        roles.push(ColumnRole::Drift { order: o });
    }
    let bad = collinear_columns(&columns);
    if !bad.is_empty() {
        return Err(GlmError::RankDeficient { columns: bad.iter().map(|&c| roles[c].to_string()).collect() });
    }
    Ok(DesignMatrix { columns, roles })
}
