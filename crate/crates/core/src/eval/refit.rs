//! Parcel-wise alternating least squares fit of an FIR HRF and voxel
//! amplitudes, `y_j ~ sum_m a_j^m X^m h + drift`.
//!
//! Drift is projected out first. Given the HRF, each voxel's amplitudes are a
//! small least-squares problem; given the amplitudes, the HRF solves one
//! stacked least-squares problem over all voxels of the parcel. After each
//! HRF update the HRF is rescaled so its largest-magnitude sample is 1 and
//! the amplitudes absorb the inverse scale.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::drift::dct_basis;
use crate::glmfit::{canonical_hrf_basis, CanonicalHrfParams};
use crate::par;
use crate::simgen::{build_stim_matrix, Dataset, HrfCurve};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefitSettings {
    pub drift_order: usize,
    /// FIR support in seconds; the HRF has `hrf_duration / dt + 1` taps.
    pub hrf_duration: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub canonical: CanonicalHrfParams,
}

impl Default for RefitSettings {
    fn default() -> Self {
        Self {
            drift_order: 4,
            hrf_duration: 25.0,
            max_iters: 100,
            tol: 1e-10,
            canonical: CanonicalHrfParams::default(),
        }
    }
}

/// Result of the refit. Maps are keyed by parcel label.
#[derive(Debug, Clone, PartialEq)]
pub struct HrfRefit {
    pub hrfs: BTreeMap<usize, HrfCurve>,
    /// `amplitudes[j][m]`
    pub amplitudes: Vec<Vec<f64>>,
    /// Stacked residual sum of squares after every amplitude update.
    pub traces: BTreeMap<usize, Vec<f64>>,
    /// Parcels whose every series lies in the drift span. Only
    /// [`als_hrf_refit_lenient`] produces them; they have no HRF and zero
    /// amplitudes.
    pub silent_parcels: Vec<usize>,
}

impl HrfRefit {
    /// Amplitudes of one condition, one per voxel.
    pub fn condition_amplitudes(&self, m: usize) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a[m]).collect()
    }
}

struct Operators {
    /// Drift-projected stimulus matrices, one per condition.
    g: Vec<DMatrix<f64>>,
    /// `gram[m][k] = G_m^T G_k`
    gram: Vec<Vec<DMatrix<f64>>>,
    /// Drift-projected series per voxel.
    y: Vec<DVector<f64>>,
    /// Voxels whose series lies in the drift span up to rounding.
    silent: Vec<bool>,
    init: DVector<f64>,
    dt: f64,
}

/// Relative norm below which a projected series or residual is rounding noise.
const ROUNDING_REL: f64 = 1e-12;

struct ParcelFit {
    hrf: DVector<f64>,
    amplitudes: Vec<Vec<f64>>,
    trace: Vec<f64>,
}

fn amplitude_step(ops: &Operators, members: &[usize], h: &DVector<f64>) -> Vec<Vec<f64>> {
    let m = ops.g.len();
    let responses: Vec<DVector<f64>> = ops.g.iter().map(|g| g * h).collect();
    let b = DMatrix::from_fn(m, m, |r, c| responses[r].dot(&responses[c]));
    let chol = b.clone().cholesky();
    members
        .iter()
        .map(|&j| {
            if ops.silent[j] {
                return vec![0.0; m];
            }
            let rhs = DVector::from_iterator(m, responses.iter().map(|r| r.dot(&ops.y[j])));
            match &chol {
                Some(c) => c.solve(&rhs).as_slice().to_vec(),
                // a response that vanishes carries no information on its amplitude
                None => b
                    .clone()
                    .svd(true, true)
                    .solve(&rhs, 1e-12)
                    .map(|v| v.as_slice().to_vec())
                    .unwrap_or_else(|_| vec![0.0; m]),
            }
        })
        .collect()
}

fn hrf_step(ops: &Operators, parcel: usize, members: &[usize], amps: &[Vec<f64>]) -> Result<DVector<f64>, EvalError> {
    let m = ops.g.len();
    let taps = ops.init.len();
    let mut lhs = DMatrix::zeros(taps, taps);
    let mut rhs = DVector::zeros(taps);
    for a in 0..m {
        let mut weighted_y = DVector::zeros(ops.y[0].len());
        for (k, &j) in members.iter().enumerate() {
            weighted_y.axpy(amps[k][a], &ops.y[j], 1.0);
        }
        rhs += ops.g[a].transpose() * weighted_y;
        for c in 0..m {
            let w: f64 = amps.iter().map(|v| v[a] * v[c]).sum();
            if w != 0.0 {
                lhs += &ops.gram[a][c] * w;
            }
        }
    }
    let scale = lhs.diagonal().amax();
    if !(scale > 0.0) {
        return Err(EvalError::SingularHrfSystem { parcel });
    }
    let chol = lhs.cholesky().ok_or(EvalError::SingularHrfSystem { parcel })?;
    let d = chol.l_dirty().diagonal();
    if d.iter().any(|v| v.abs() <= 1e-7 * scale.sqrt()) {
        return Err(EvalError::SingularHrfSystem { parcel });
    }
    Ok(chol.solve(&rhs))
}

fn residual(ops: &Operators, members: &[usize], h: &DVector<f64>, amps: &[Vec<f64>]) -> f64 {
    let responses: Vec<DVector<f64>> = ops.g.iter().map(|g| g * h).collect();
    members
        .iter()
        .zip(amps)
        .map(|(&j, a)| {
            let mut r = ops.y[j].clone();
            for (resp, &am) in responses.iter().zip(a) {
                r.axpy(-am, resp, 1.0);
            }
            r.norm_squared()
        })
        .sum()
}

fn fit_parcel(
    ops: &Operators,
    parcel: usize,
    members: &[usize],
    settings: &RefitSettings,
) -> Result<ParcelFit, EvalError> {
    let mut h = ops.init.clone();
    let mut amps = amplitude_step(ops, members, &h);
    let energy: f64 = members.iter().map(|&j| ops.y[j].norm_squared()).sum();
    let floor = ROUNDING_REL * ROUNDING_REL * energy;
    let mut trace = vec![residual(ops, members, &h, &amps)];
    for _ in 0..settings.max_iters {
        h = hrf_step(ops, parcel, members, &amps)?;
        let peak = h.iter().copied().fold(0.0_f64, |b, v| if v.abs() > b.abs() { v } else { b });
        if peak == 0.0 {
            return Err(EvalError::SingularHrfSystem { parcel });
        }
        h /= peak;
        amps = amplitude_step(ops, members, &h);
        let r = residual(ops, members, &h, &amps);
        let prev = *trace.last().expect("trace starts non-empty");
        trace.push(r);
        if r <= floor || (prev - r).abs() <= settings.tol * prev {
            break;
        }
    }
    Ok(ParcelFit { hrf: h, amplitudes: amps, trace })
}

/// Refits one FIR HRF per parcel of `labels` and per-voxel amplitudes from
/// the BOLD series of `dataset`. Ground truth is not used. A parcel without
/// excitation is rejected as singular.
pub fn als_hrf_refit(dataset: &Dataset, labels: &[usize], settings: &RefitSettings) -> Result<HrfRefit, EvalError> {
    refit(dataset, labels, settings, false)
}

/// As [`als_hrf_refit`], but a parcel whose series are all silent is
/// reported in `silent_parcels` with zero amplitudes instead of failing.
/// Parcels with some signal that still give a singular system are errors.
pub fn als_hrf_refit_lenient(
    dataset: &Dataset,
    labels: &[usize],
    settings: &RefitSettings,
) -> Result<HrfRefit, EvalError> {
    refit(dataset, labels, settings, true)
}

fn refit(dataset: &Dataset, labels: &[usize], settings: &RefitSettings, lenient: bool) -> Result<HrfRefit, EvalError> {
    if labels.len() != dataset.n_voxels() {
        return Err(EvalError::LengthMismatch { left: labels.len(), right: dataset.n_voxels() });
    }
    let paradigm = &dataset.paradigm;
    let n = paradigm.n_scans;
    let dt = paradigm.dt;
    let steps = settings.hrf_duration / dt;
    if (steps - steps.round()).abs() > 1e-9 {
        return Err(EvalError::InvalidSettings(format!(
            "HRF duration {} s is not a multiple of dt = {dt} s",
            settings.hrf_duration
        )));
    }
    let max_lag = steps.round() as usize;
    if settings.drift_order >= n || max_lag + 1 + settings.drift_order >= n {
        return Err(EvalError::InvalidSettings(format!(
            "{n} scans cannot support {} HRF taps plus {} drift regressors",
            max_lag + 1,
            settings.drift_order
        )));
    }

    let p = dct_basis(n, settings.drift_order);
    let project = |v: DVector<f64>| {
        let coef = p.transpose() * &v;
        v - &p * coef
    };
    let g: Vec<DMatrix<f64>> = (0..paradigm.n_conditions())
        .map(|m| {
            let x = build_stim_matrix(paradigm, m, max_lag).map_err(|e| EvalError::InvalidSettings(e.to_string()))?;
            Ok(&x - &p * (p.transpose() * &x))
        })
        .collect::<Result<_, EvalError>>()?;
    let gram = g.iter().map(|a| g.iter().map(|b| a.transpose() * b).collect()).collect();
    let (y, silent): (Vec<_>, Vec<_>) = dataset
        .y
        .iter()
        .map(|s| {
            let raw = DVector::from_column_slice(s);
            let norm = raw.norm();
            let v = project(raw);
            let quiet = v.norm() <= ROUNDING_REL * norm;
            (v, quiet)
        })
        .unzip();
    let [canon, _, _] = canonical_hrf_basis(&settings.canonical, paradigm.tr, dt, settings.hrf_duration.max(25.0))
        .map_err(|e| EvalError::InvalidSettings(e.to_string()))?;
    let canon = canon.peak_normalized();
    let init = DVector::from_iterator(
        max_lag + 1,
        canon.samples().iter().copied().chain(std::iter::repeat(0.0)).take(max_lag + 1),
    );
    let ops = Operators { g, gram, y, silent, init, dt };

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (j, &l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(j);
    }
    let parcels: Vec<(usize, Vec<usize>)> = groups.into_iter().collect();
    let skip = |members: &[usize]| lenient && members.iter().all(|&j| ops.silent[j]);
    let fits = par::map_slice(&parcels, |(label, members)| {
        if skip(members) {
            return Ok(None);
        }
        fit_parcel(&ops, *label, members, settings).map(Some)
    });

    let mut out = HrfRefit {
        hrfs: BTreeMap::new(),
        amplitudes: vec![Vec::new(); labels.len()],
        traces: BTreeMap::new(),
        silent_parcels: Vec::new(),
    };
    let m = paradigm.n_conditions();
    for ((label, members), fit) in parcels.iter().zip(fits) {
        let Some(fit) = fit? else {
            for &j in members {
                out.amplitudes[j] = vec![0.0; m];
            }
            out.silent_parcels.push(*label);
            continue;
        };
        for (&j, a) in members.iter().zip(fit.amplitudes) {
            out.amplitudes[j] = a;
        }
        out.hrfs.insert(*label, HrfCurve::new(fit.hrf.as_slice().to_vec(), ops.dt));
        out.traces.insert(*label, fit.trace);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::{default_phantom, synthesize_dataset, DriftSpec};

    fn noiseless() -> Dataset {
        let (grid, truth, paradigm) = default_phantom(1).unwrap();
        synthesize_dataset(grid, truth, paradigm, DriftSpec::default(), 0.0, 1).unwrap()
    }

    #[test]
    fn recovers_generating_hrfs_without_noise() {
        let ds = noiseless();
        let refit = als_hrf_refit(&ds, &ds.truth.parcel_labels, &RefitSettings::default()).unwrap();
        for (k, truth) in ds.truth.hrfs.iter().enumerate() {
            let want = truth.peak_normalized();
            let got = &refit.hrfs[&k];
            assert_eq!(got.samples().len(), want.samples().len());
            let err = got.samples().iter().zip(want.samples()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-6, "parcel {k}: {err}");
            assert!(refit.traces[&k].windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-18));
        }
        for (j, a) in ds.truth.amplitudes.iter().enumerate() {
            let scale = ds.truth.hrfs[ds.truth.parcel_labels[j]].peak();
            assert!((refit.amplitudes[j][0] - a[0] * scale).abs() < 1e-6);
        }
    }

    #[test]
    fn residual_never_increases_with_noise() {
        let (grid, truth, paradigm) = default_phantom(2).unwrap();
        let ds = synthesize_dataset(grid, truth, paradigm, DriftSpec::default(), 1.5, 2).unwrap();
        // quadrant halves: every parcel mixes territories or background
        let labels: Vec<usize> = (0..ds.n_voxels()).map(|j| ds.grid.coords(j).0 / 10).collect();
        let refit = als_hrf_refit(&ds, &labels, &RefitSettings::default()).unwrap();
        for trace in refit.traces.values() {
            assert!(trace.len() >= 2);
            assert!(trace.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-10)));
        }
        for h in refit.hrfs.values() {
            let peak = h.samples().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            assert!((peak - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn silent_parcel_is_singular() {
        let (grid, mut truth, paradigm) = default_phantom(3).unwrap();
        for (j, a) in truth.amplitudes.iter_mut().enumerate() {
            if truth.parcel_labels[j] == 2 {
                a[0] = 0.0;
                truth.activation_labels[j] = false;
            }
        }
        let ds = synthesize_dataset(grid, truth, paradigm, DriftSpec::default(), 0.0, 3).unwrap();
        let err = als_hrf_refit(&ds, &ds.truth.parcel_labels, &RefitSettings::default()).unwrap_err();
        assert!(matches!(err, EvalError::SingularHrfSystem { parcel: 2 }), "{err}");
        let lenient = als_hrf_refit_lenient(&ds, &ds.truth.parcel_labels, &RefitSettings::default()).unwrap();
        assert_eq!(lenient.silent_parcels, vec![2]);
        assert!(!lenient.hrfs.contains_key(&2));
        for (j, a) in lenient.amplitudes.iter().enumerate() {
            assert_eq!(a[0] == 0.0, ds.truth.parcel_labels[j] == 2 || ds.truth.amplitudes[j][0] == 0.0);
        }
    }

    #[test]
    fn rejects_bad_settings() {
        let ds = noiseless();
        let s = RefitSettings { hrf_duration: 25.2, ..RefitSettings::default() };
        assert!(matches!(als_hrf_refit(&ds, &ds.truth.parcel_labels, &s), Err(EvalError::InvalidSettings(_))));
        assert!(als_hrf_refit(&ds, &[0; 3], &RefitSettings::default()).is_err());
    }
}
