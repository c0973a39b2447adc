//! Ground-truth phantom: tiled hemodynamic territories, one activation blob
//! per territory and Gaussian response amplitudes on active voxels.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{build_bezier_hrf, BezierHrfSpec, Grid2D, GroundTruth, Paradigm, SimError};
use crate::seed;

/// How stimulus onsets are produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OnsetDesign {
    /// Fixed onset lists, one per condition (seconds).
    Explicit { onsets: Vec<Vec<f64>> },
    /// Seeded jittered event-related design.
    Jittered { conditions: usize, first_onset: f64, isi_min: f64, isi_max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParadigmSpec {
    pub n_scans: usize,
    pub tr: f64,
    pub dt: f64,
    pub design: OnsetDesign,
}

impl ParadigmSpec {
    pub fn build(&self, seed: u64) -> Result<Paradigm, SimError> {
        match &self.design {
            OnsetDesign::Explicit { onsets } => Paradigm::new(onsets.clone(), self.n_scans, self.tr, self.dt),
            OnsetDesign::Jittered { conditions, first_onset, isi_min, isi_max } => Paradigm::jittered(
                *conditions,
                self.n_scans,
                self.tr,
                self.dt,
                *first_onset,
                *isi_min,
                *isi_max,
                &mut seed::rng(seed, &[seed::tag::PARADIGM]),
            ),
        }
    }
}

impl Default for ParadigmSpec {
    fn default() -> Self {
        Self {
            n_scans: 600,
            tr: 1.0,
            dt: 0.5,
            design: OnsetDesign::Jittered { conditions: 1, first_onset: 2.0, isi_min: 3.0, isi_max: 7.0 },
        }
    }
}

/// Gaussian law of active-voxel amplitudes, parameterised by variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmplitudeLaw {
    pub mean: f64,
    pub variance: f64,
}

impl AmplitudeLaw {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        Normal::new(self.mean, self.variance.sqrt()).expect("amplitude variance is validated non-negative").sample(rng)
    }
}

impl Default for AmplitudeLaw {
    fn default() -> Self {
        Self { mean: 1.8, variance: 0.25 }
    }
}

/// Phantom layout: the grid is cut into `tiles = [columns, rows]` rectangular
/// territories, territory `k` gets `hrfs[k]` and a disc of active voxels of
/// radius `blob_radius` centred in the tile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    pub tiles: [usize; 2],
    pub blob_radius: f64,
    pub amplitude: AmplitudeLaw,
    pub hrfs: Vec<BezierHrfSpec>,
    pub paradigm: ParadigmSpec,
}

/// Four territory HRFs with times to peak 4, 6, 8 and 10 s.
pub fn default_hrf_specs() -> Vec<BezierHrfSpec> {
    [4.0, 6.0, 8.0, 10.0]
        .into_iter()
        .map(|ttp| BezierHrfSpec {
            time_to_peak: ttp,
            peak_amplitude: 1.0,
            time_to_undershoot: ttp + 6.0,
            undershoot_amplitude: -0.2,
            duration: 25.0,
            peak_width: 3.0,
            undershoot_width: 4.0,
        })
        .collect()
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            width: 20,
            height: 20,
            tiles: [2, 2],
            blob_radius: 3.0,
            amplitude: AmplitudeLaw::default(),
            hrfs: default_hrf_specs(),
            paradigm: ParadigmSpec::default(),
        }
    }
}

impl PhantomSpec {
    pub fn n_territories(&self) -> usize {
        self.tiles[0] * self.tiles[1]
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let [cols, rows] = self.tiles;
        if cols == 0 || rows == 0 || cols > self.width || rows > self.height {
            return Err(SimError::InvalidTruth(format!(
                "tiles {cols}x{rows} do not fit a {}x{} grid",
                self.width, self.height
            )));
        }
        if self.hrfs.len() != self.n_territories() {
            return Err(SimError::InvalidTruth(format!(
                "{} HRF specs for {} territories",
                self.hrfs.len(),
                self.n_territories()
            )));
        }
        if !(self.amplitude.variance >= 0.0 && self.amplitude.mean.is_finite()) {
            return Err(SimError::InvalidTruth(format!("amplitude law {:?}", self.amplitude)));
        }
        Ok(())
    }

    /// Territory label of every voxel.
    pub fn territory_map(&self, grid: &Grid2D) -> Vec<usize> {
        let [cols, rows] = self.tiles;
        (0..grid.n_voxels())
            .map(|j| {
                let (x, y) = grid.coords(j);
                let tx = x * cols / grid.width();
                let ty = y * rows / grid.height();
                ty * cols + tx
            })
            .collect()
    }

    /// Activation mask: one disc per tile, centred on the tile.
    pub fn activation_map(&self, grid: &Grid2D) -> Vec<bool> {
        let [cols, rows] = self.tiles;
        let r2 = self.blob_radius * self.blob_radius;
        (0..grid.n_voxels())
            .map(|j| {
                let (x, y) = grid.coords(j);
                let tx = x * cols / grid.width();
                let ty = y * rows / grid.height();
                let x0 = (tx * grid.width()).div_ceil(cols);
                let x1 = ((tx + 1) * grid.width()).div_ceil(cols);
                let y0 = (ty * grid.height()).div_ceil(rows);
                let y1 = ((ty + 1) * grid.height()).div_ceil(rows);
                let cx = 0.5 * (x0 + x1 - 1) as f64;
                let cy = 0.5 * (y0 + y1 - 1) as f64;
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                dx * dx + dy * dy <= r2
            })
            .collect()
    }

    /// Builds grid, ground truth and paradigm. Amplitudes and (for jittered
    /// designs) onsets are drawn from streams derived from `seed`.
    pub fn build(&self, seed: u64) -> Result<(Grid2D, GroundTruth, Paradigm), SimError> {
        self.validate()?;
        let grid = Grid2D::new(self.width, self.height)?;
        let paradigm = self.paradigm.build(seed)?;
        let hrfs = self.hrfs.iter().map(|s| build_bezier_hrf(s, paradigm.dt)).collect::<Result<Vec<_>, _>>()?;
        let parcel_labels = self.territory_map(&grid);
        let activation_labels = self.activation_map(&grid);
        let m = paradigm.n_conditions();
        let amplitudes = activation_labels
            .iter()
            .enumerate()
            .map(|(j, &active)| {
                if active {
                    let mut rng = seed::rng(seed, &[seed::tag::AMPLITUDE, j as u64]);
                    (0..m).map(|_| self.amplitude.sample(&mut rng)).collect()
                } else {
                    vec![0.0; m]
                }
            })
            .collect();
        let truth = GroundTruth { parcel_labels, activation_labels, amplitudes, hrfs };
        truth.validate(&grid, m)?;
        Ok((grid, truth, paradigm))
    }
}

/// The reference 20x20 phantom with four quadrant territories.
pub fn default_phantom(seed: u64) -> Result<(Grid2D, GroundTruth, Paradigm), SimError> {
    PhantomSpec::default().build(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parcellation::connected_components;

    #[test]
    fn four_connected_territories() {
        let (grid, truth, _) = default_phantom(11).unwrap();
        assert_eq!((grid.width(), grid.height()), (20, 20));
        assert_eq!(truth.n_parcels(), 4);
        assert_eq!(connected_components(&grid, &truth.parcel_labels), 4);
        let mut act = vec![0; 4];
        for (j, &q) in truth.activation_labels.iter().enumerate() {
            act[truth.parcel_labels[j]] += q as usize;
        }
        assert!(act.iter().all(|&c| c == act[0] && c > 0), "{act:?}");
    }

    #[test]
    fn same_seed_same_phantom() {
        assert_eq!(default_phantom(3).unwrap(), default_phantom(3).unwrap());
        assert_ne!(default_phantom(3).unwrap().1, default_phantom(4).unwrap().1);
    }

    #[test]
    fn amplitude_law_mean() {
        let law = AmplitudeLaw::default();
        let mut rng = seed::rng(21, &[]);
        let n = 10_000;
        let mean = (0..n).map(|_| law.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 1.8).abs() < 0.02, "{mean}");
    }

    #[test]
    fn inactive_voxels_have_zero_amplitude() {
        let (_, truth, _) = default_phantom(0).unwrap();
        for (a, &q) in truth.amplitudes.iter().zip(&truth.activation_labels) {
            assert_eq!(a.iter().all(|&x| x == 0.0), !q);
        }
    }

    #[test]
    fn spec_rejects_mismatched_hrf_count() {
        let spec = PhantomSpec { tiles: [3, 1], ..PhantomSpec::default() };
        assert!(spec.build(0).is_err());
    }
}
