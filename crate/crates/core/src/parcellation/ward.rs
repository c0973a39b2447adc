//! Ward's minimum-variance agglomeration restricted to adjacent parcels.
//! Activation statistics are ignored.

use std::collections::BTreeMap;

use nalgebra::Vector2;

use super::igmm::check_target;
use super::{MergeRecord, ParcelError, ParcelState};
use crate::glmfit::FeatureMap;
use crate::simgen::Grid2D;

#[derive(Debug, Clone, Copy)]
struct Cluster {
    size: f64,
    mean: Vector2<f64>,
}

/// Ward merge cost `n_a n_b / (n_a + n_b) * |mean_a - mean_b|^2`.
fn ward_cost(a: &Cluster, b: &Cluster) -> f64 {
    a.size * b.size / (a.size + b.size) * (a.mean - b.mean).norm_squared()
}

/// Spatially constrained Ward down to `target_parcels` parcels. Exact cost
/// ties go to the smallest `(min id, max id)` pair.
pub fn spatial_ward(features: &FeatureMap, grid: Grid2D, target_parcels: usize) -> Result<ParcelState, ParcelError> {
    spatial_ward_logged(features, grid, target_parcels).map(|(s, _)| s)
}

pub fn spatial_ward_logged(
    features: &FeatureMap,
    grid: Grid2D,
    target_parcels: usize,
) -> Result<(ParcelState, Vec<MergeRecord>), ParcelError> {
    if features.len() != grid.n_voxels() {
        return Err(ParcelError::SizeMismatch { features: features.len(), voxels: grid.n_voxels() });
    }
    check_target(target_parcels, grid.n_voxels())?;
    let mut state = ParcelState::singletons(grid);
    let mut clusters: BTreeMap<usize, Cluster> =
        features.phi.iter().enumerate().map(|(j, p)| (j, Cluster { size: 1.0, mean: Vector2::from(*p) })).collect();
    let mut costs: BTreeMap<(usize, usize), f64> =
        state.adjacent_pairs().into_iter().map(|(a, b)| ((a, b), ward_cost(&clusters[&a], &clusters[&b]))).collect();

    let mut log = Vec::new();
    while state.n_parcels() > target_parcels {
        let (&(a, b), &cost) = costs
            .iter()
            .fold(None, |best: Option<(&(usize, usize), &f64)>, cur| match best {
                Some(bst) if cur.1 >= bst.1 => Some(bst),
                _ => Some(cur),
            })
            .ok_or(ParcelError::Stuck { remaining: state.n_parcels() })?;
        let keep = state.merge(a, b)?;
        let (ca, cb) = (clusters.remove(&a).unwrap(), clusters.remove(&b).unwrap());
        let size = ca.size + cb.size;
        let merged = Cluster { size, mean: (ca.mean * ca.size + cb.mean * cb.size) / size };
        clusters.insert(keep, merged);
        costs.retain(|&(x, y), _| x != a && x != b && y != a && y != b);
        for n in state.neighbors(keep) {
            let key = (keep.min(n), keep.max(n));
            costs.insert(key, ward_cost(&merged, &clusters[&n]));
        }
        log.push(MergeRecord { step: log.len(), gamma: a, tau: b, gain: -cost });
    }
    Ok((state, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parcellation::labels_connected;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn collinear_path() {
        let grid = Grid2D::new(3, 1).unwrap();
        let f = FeatureMap::new(vec![[0.0, 0.0], [1.0, 0.0], [10.0, 0.0]], vec![0.5; 3]);
        let (s, log) = spatial_ward_logged(&f, grid, 1).unwrap();
        assert_eq!((log[0].gamma, log[0].tau), (0, 1));
        assert_eq!(log[0].gain, -0.5);
        // {0,1} at mean 0.5 against 10: 2*1/3 * 9.5^2
        assert!((log[1].gain + 2.0 / 3.0 * 90.25).abs() < 1e-12);
        assert_eq!(s.n_parcels(), 1);
    }

    #[test]
    fn identical_points_cost_nothing() {
        let grid = Grid2D::new(4, 1).unwrap();
        let f = FeatureMap::new(vec![[5.0, 1.0], [0.0, 2.0], [0.0, 2.0], [-3.0, 2.0]], vec![0.1; 4]);
        let (_, log) = spatial_ward_logged(&f, grid, 3).unwrap();
        assert_eq!((log[0].gamma, log[0].tau, log[0].gain), (1, 2, -0.0));
    }

    #[test]
    fn alpha_is_ignored() {
        let grid = Grid2D::new(5, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let phi: Vec<[f64; 2]> = (0..25).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        let a = FeatureMap::new(phi.clone(), vec![0.5; 25]);
        let b = FeatureMap::new(phi, (0..25).map(|_| rng.random_range(0.0..1.0)).collect());
        let (sa, la) = spatial_ward_logged(&a, grid, 3).unwrap();
        let (sb, lb) = spatial_ward_logged(&b, grid, 3).unwrap();
        assert_eq!(sa.labels(), sb.labels());
        assert_eq!(la, lb);
        assert!(labels_connected(&grid, sa.labels()));
    }
}
