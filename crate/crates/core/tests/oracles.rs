//! Library results against the independent reference implementations.

mod common;

use hemoparcel::glmfit::{FeatureMap, OlsSolver};
use hemoparcel::parcellation::{
    igmm_agglomerate_logged, merge_gain, mixture_loglik, spatial_ward_logged, weighted_mixture_fit, ParcelState,
};
use hemoparcel::simgen::Grid2D;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn log_of(records: &[hemoparcel::parcellation::MergeRecord]) -> Vec<(usize, usize, f64)> {
    records.iter().map(|r| (r.gamma, r.tau, r.gain)).collect()
}

#[test]
fn mixture_fit_matches_reference_moments() {
    for seed in 0..20 {
        let (phi, alpha) = common::random_instance(12, seed);
        let f = FeatureMap::new(phi.clone(), alpha.clone());
        let members = [0, 3, 4, 7, 11];
        let got = weighted_mixture_fit(&members, &f);
        let pts: Vec<[f64; 2]> = members.iter().map(|&j| phi[j]).collect();
        let al: Vec<f64> = members.iter().map(|&j| alpha[j]).collect();
        let want = common::fit_mixture(&pts, &al, common::image_ridge(&phi));
        assert!((got.lambda[1] - want.lambda1).abs() < 1e-12);
        for i in 0..2 {
            let (m, s) = (&want.class[i].mean, &want.class[i].cov);
            assert!((got.mu[i][0] - m[0]).abs() < 1e-12 && (got.mu[i][1] - m[1]).abs() < 1e-12);
            assert!((got.sigma[i][(0, 0)] - s[0]).abs() < 1e-12);
            assert!((got.sigma[i][(0, 1)] - s[1]).abs() < 1e-12);
            assert!((got.sigma[i][(1, 0)] - s[1]).abs() < 1e-12);
            assert!((got.sigma[i][(1, 1)] - s[2]).abs() < 1e-12);
        }
        let ll = mixture_loglik(&members, &got, &f);
        assert!((ll - common::log_likelihood(&pts, &want)).abs() < 1e-9 * ll.abs().max(1.0));
    }
}

#[test]
fn merge_gain_equals_direct_likelihood_difference() {
    let grid = Grid2D::new(3, 3).unwrap();
    for seed in 0..30 {
        let (phi, alpha) = common::random_instance(9, 100 + seed);
        let f = FeatureMap::new(phi.clone(), alpha.clone());
        let mut state = ParcelState::singletons(grid);
        state.merge(0, 1).unwrap();
        state.merge(3, 4).unwrap();
        let got = merge_gain(&state, 0, 3, &f).unwrap().gain;
        let ridge = common::image_ridge(&phi);
        let ll = |idx: &[usize]| {
            let p: Vec<[f64; 2]> = idx.iter().map(|&j| phi[j]).collect();
            let a: Vec<f64> = idx.iter().map(|&j| alpha[j]).collect();
            common::log_likelihood(&p, &common::fit_mixture(&p, &a, ridge))
        };
        let want = ll(&[0, 1, 3, 4]) - ll(&[0, 1]) - ll(&[3, 4]);
        assert!((got - want).abs() < 1e-9 * want.abs().max(1.0), "{got} vs {want}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn igmm_follows_exhaustive_greedy(seed in any::<u64>(), w in 2usize..5, h in 2usize..4, k in 1usize..4) {
        let (phi, alpha) = common::random_instance(w * h, seed);
        let f = FeatureMap::new(phi.clone(), alpha.clone());
        let grid = Grid2D::new(w, h).unwrap();
        let (state, log) = igmm_agglomerate_logged(&f, grid, k).unwrap();
        let (labels, oracle) = common::igmm_oracle(&phi, &alpha, w, h, k);
        prop_assert_eq!(common::count_mismatches(&log_of(&log), &oracle, 1e-9), 0);
        prop_assert_eq!(state.labels(), &labels[..]);
    }

    #[test]
    fn ward_follows_exhaustive_greedy(seed in any::<u64>(), w in 2usize..6, h in 2usize..5, k in 1usize..4) {
        let (phi, _) = common::random_instance(w * h, seed);
        let f = FeatureMap::new(phi.clone(), vec![0.5; w * h]);
        let (state, log) = spatial_ward_logged(&f, Grid2D::new(w, h).unwrap(), k).unwrap();
        let (labels, oracle) = common::ward_oracle(&phi, w, h, k);
        prop_assert_eq!(common::count_mismatches(&log_of(&log), &oracle, 1e-9), 0);
        prop_assert_eq!(state.labels(), &labels[..]);
    }
}

#[test]
fn ols_matches_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let rows: Vec<Vec<f64>> = (0..50).map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let y: Vec<f64> = (0..50).map(|_| rng.random_range(-2.0..2.0)).collect();
        let x = DMatrix::from_fn(50, 5, |i, j| rows[i][j]);
        let fit = OlsSolver::from_matrix(x).unwrap().fit(&y).unwrap();
        let want = common::normal_equations(&rows, &y);
        for (a, b) in fit.beta.iter().zip(&want) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }
}
