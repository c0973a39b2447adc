//! Stimulus timing and the lagged binary stimulus matrices.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SimError;

/// Event onsets for each experimental condition on a scan grid of `n_scans`
/// volumes acquired every `tr` seconds. `dt` is the finer HRF sampling grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paradigm {
    pub onsets: Vec<Vec<f64>>,
    pub n_scans: usize,
    pub tr: f64,
    pub dt: f64,
}

impl Paradigm {
    pub fn new(onsets: Vec<Vec<f64>>, n_scans: usize, tr: f64, dt: f64) -> Result<Self, SimError> {
        let p = Self { onsets, n_scans, tr, dt };
        p.validate()?;
        Ok(p)
    }

    /// Jittered event-related design: onsets start at `first_onset` and are
    /// separated by intervals drawn uniformly from `[isi_min, isi_max]`,
    /// snapped to the `dt` lattice. One independent train per condition.
    #[allow(clippy::too_many_arguments)]
    pub fn jittered<R: Rng>(
        conditions: usize,
        n_scans: usize,
        tr: f64,
        dt: f64,
        first_onset: f64,
        isi_min: f64,
        isi_max: f64,
        rng: &mut R,
    ) -> Result<Self, SimError> {
        if !(isi_min > 0.0 && isi_max >= isi_min) {
            return Err(SimError::InvalidParadigm(format!(
                "inter-stimulus interval range [{isi_min}, {isi_max}] is empty or non-positive"
            )));
        }
        let window = n_scans as f64 * tr;
        let onsets = (0..conditions)
            .map(|_| {
                let mut times = Vec::new();
                let mut t = snap(first_onset, dt);
                while t < window {
                    times.push(t);
                    let isi = if isi_max > isi_min { rng.random_range(isi_min..=isi_max) } else { isi_min };
                    t = snap(t + isi, dt).max(t + dt);
                }
                times
            })
            .collect();
        Self::new(onsets, n_scans, tr, dt)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidParadigm(msg));
        if self.onsets.is_empty() {
            return bad("at least one condition is required".into());
        }
        if self.n_scans == 0 {
            return bad("n_scans must be positive".into());
        }
        if !(self.dt > 0.0 && self.tr > 0.0) {
            return bad(format!("tr ({}) and dt ({}) must be positive", self.tr, self.dt));
        }
        let ratio = self.tr / self.dt;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return bad(format!("tr ({}) is not an integer multiple of dt ({})", self.tr, self.dt));
        }
        let window = self.n_scans as f64 * self.tr;
        for (m, times) in self.onsets.iter().enumerate() {
            if times.iter().any(|&t| !(0.0..window).contains(&t)) {
                return bad(format!("condition {m}: onset outside [0, {window})"));
            }
            if times.windows(2).any(|w| w[1] <= w[0]) {
                return bad(format!("condition {m}: onsets are not strictly increasing"));
            }
        }
        Ok(())
    }

    pub fn n_conditions(&self) -> usize {
        self.onsets.len()
    }

    /// Fine-grid steps per scan.
    pub fn oversampling(&self) -> usize {
        (self.tr / self.dt).round() as usize
    }

    /// Length of the fine `dt` grid covering the acquisition window.
    pub fn fine_len(&self) -> usize {
        self.n_scans * self.oversampling()
    }

    /// Binary impulse train for `condition` on the fine grid; onsets are
    /// rounded to the nearest `dt` multiple.
    pub fn impulse_train(&self, condition: usize) -> Vec<f64> {
        let mut train = vec![0.0; self.fine_len()];
        for &t in &self.onsets[condition] {
            let k = (t / self.dt).round() as usize;
            if k < train.len() {
                train[k] = 1.0;
            }
        }
        train
    }
}

fn snap(t: f64, dt: f64) -> f64 {
    (t / dt).round() * dt
}

/// The `n_scans x (max_lag + 1)` stimulus matrix of one condition: entry
/// `(n, d)` is 1 iff an onset falls at `n * tr - d * dt`.
pub fn build_stim_matrix(paradigm: &Paradigm, condition: usize, max_lag: usize) -> Result<DMatrix<f64>, SimError> {
    if condition >= paradigm.n_conditions() {
        return Err(SimError::InvalidParadigm(format!(
            "condition {condition} out of range ({} conditions)",
            paradigm.n_conditions()
        )));
    }
    if max_lag as f64 * paradigm.dt > paradigm.n_scans as f64 * paradigm.tr + 1e-9 {
        return Err(SimError::InvalidParadigm(format!(
            "HRF support {} s exceeds the acquisition window",
            max_lag as f64 * paradigm.dt
        )));
    }
    let train = paradigm.impulse_train(condition);
    let os = paradigm.oversampling();
    Ok(DMatrix::from_fn(paradigm.n_scans, max_lag + 1, |n, d| {
        let k = n * os;
        if d <= k {
            train[k - d]
        } else {
            0.0
        }
    }))
}
