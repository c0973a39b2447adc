//! Reference implementations used as test oracles. They share no code with
//! the library: plain arrays, explicit 2x2 algebra and exhaustive recomputation
//! at every step.

#![allow(dead_code, clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FLOOR_MASS: f64 = 1e-6;
pub const RIDGE_REL: f64 = 1e-4;

#[derive(Debug, Clone, Copy)]
pub struct Moments {
    pub mean: [f64; 2],
    /// (s00, s01, s11)
    pub cov: [f64; 3],
}

#[derive(Debug, Clone, Copy)]
pub struct Mixture {
    pub lambda1: f64,
    pub class: [Moments; 2],
}

pub fn weighted(points: &[[f64; 2]], w: &[f64]) -> Moments {
    let mass: f64 = w.iter().sum();
    let mut mean = [0.0; 2];
    for (p, &wi) in points.iter().zip(w) {
        mean[0] += wi * p[0] / mass;
        mean[1] += wi * p[1] / mass;
    }
    let mut cov = [0.0; 3];
    for (p, &wi) in points.iter().zip(w) {
        let (dx, dy) = (p[0] - mean[0], p[1] - mean[1]);
        cov[0] += wi * dx * dx / mass;
        cov[1] += wi * dx * dy / mass;
        cov[2] += wi * dy * dy / mass;
    }
    Moments { mean, cov }
}

/// Ridge from the population variance of each feature over the whole map.
pub fn image_ridge(phi: &[[f64; 2]]) -> f64 {
    let n = phi.len() as f64;
    let mut total = 0.0;
    for k in 0..2 {
        let m = phi.iter().map(|p| p[k]).sum::<f64>() / n;
        total += phi.iter().map(|p| (p[k] - m) * (p[k] - m)).sum::<f64>() / n;
    }
    let v = total / 2.0;
    if v > 0.0 {
        RIDGE_REL * v
    } else {
        RIDGE_REL
    }
}

pub fn fit_mixture(points: &[[f64; 2]], alpha: &[f64], ridge: f64) -> Mixture {
    let n = points.len() as f64;
    let lambda1 = alpha.iter().sum::<f64>() / n;
    let ones = vec![1.0; points.len()];
    let class = |w: Vec<f64>| {
        let mut m = if w.iter().sum::<f64>() < FLOOR_MASS { weighted(points, &ones) } else { weighted(points, &w) };
        m.cov[0] += ridge;
        m.cov[2] += ridge;
        m
    };
    Mixture { lambda1, class: [class(alpha.iter().map(|a| 1.0 - a).collect()), class(alpha.to_vec())] }
}

pub fn log_normal(x: [f64; 2], m: &Moments) -> f64 {
    let [s00, s01, s11] = m.cov;
    let det = s00 * s11 - s01 * s01;
    let (dx, dy) = (x[0] - m.mean[0], x[1] - m.mean[1]);
    let quad = (s11 * dx * dx - 2.0 * s01 * dx * dy + s00 * dy * dy) / det;
    -(2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln() - 0.5 * quad
}

/// Sum of log mixture densities of `points` under `mix`.
pub fn log_likelihood(points: &[[f64; 2]], mix: &Mixture) -> f64 {
    let weights = [1.0 - mix.lambda1, mix.lambda1];
    points
        .iter()
        .map(|&x| {
            let terms: Vec<f64> =
                (0..2).filter(|&i| weights[i] > 0.0).map(|i| weights[i].ln() + log_normal(x, &mix.class[i])).collect();
            let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
        })
        .sum()
}

/// 4-neighbour grid edges `(a, b)` with `a < b`, row-major voxel indices.
pub fn grid_edges(width: usize, height: usize) -> Vec<(usize, usize)> {
    let mut e = Vec::new();
    for y in 0..height {
        for x in 0..width {
            let j = y * width + x;
            if x + 1 < width {
                e.push((j, j + 1));
            }
            if y + 1 < height {
                e.push((j, j + width));
            }
        }
    }
    e
}

fn adjacent_label_pairs(labels: &[usize], edges: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = edges
        .iter()
        .filter(|(u, v)| labels[*u] != labels[*v])
        .map(|&(u, v)| (labels[u].min(labels[v]), labels[u].max(labels[v])))
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}

fn members(labels: &[usize], id: usize) -> Vec<usize> {
    (0..labels.len()).filter(|&j| labels[j] == id).collect()
}

/// One greedy merge: the pair, its score, and the labels after it.
#[derive(Debug, Clone)]
pub struct OracleMerge {
    pub pair: (usize, usize),
    pub score: f64,
}

/// Runs greedy agglomeration from singletons, re-scoring every adjacent pair
/// from scratch at every step and taking the maximum score; exact ties go to
/// the smallest pair, and the merged parcel keeps the smaller id.
fn greedy(
    width: usize,
    height: usize,
    target: usize,
    score: impl Fn(&[usize], &[usize]) -> f64,
) -> (Vec<usize>, Vec<OracleMerge>) {
    let edges = grid_edges(width, height);
    let mut labels: Vec<usize> = (0..width * height).collect();
    let mut log = Vec::new();
    let mut live = labels.len();
    while live > target {
        let mut best: Option<OracleMerge> = None;
        for (a, b) in adjacent_label_pairs(&labels, &edges) {
            let s = score(&members(&labels, a), &members(&labels, b));
            if best.as_ref().is_none_or(|m| s > m.score) {
                best = Some(OracleMerge { pair: (a, b), score: s });
            }
        }
        let m = best.expect("a connected grid always has an adjacent pair");
        for l in labels.iter_mut() {
            if *l == m.pair.1 {
                *l = m.pair.0;
            }
        }
        log.push(m);
        live -= 1;
    }
    (labels, log)
}

/// Exhaustive IGMM: score = L(union) - L(a) - L(b), each with its own fit.
pub fn igmm_oracle(
    phi: &[[f64; 2]],
    alpha: &[f64],
    width: usize,
    height: usize,
    target: usize,
) -> (Vec<usize>, Vec<OracleMerge>) {
    let ridge = image_ridge(phi);
    let ll = |idx: &[usize]| {
        let pts: Vec<[f64; 2]> = idx.iter().map(|&j| phi[j]).collect();
        let al: Vec<f64> = idx.iter().map(|&j| alpha[j]).collect();
        log_likelihood(&pts, &fit_mixture(&pts, &al, ridge))
    };
    greedy(width, height, target, |a, b| {
        let mut u = [a, b].concat();
        u.sort_unstable();
        ll(&u) - ll(a) - ll(b)
    })
}

fn scatter(phi: &[[f64; 2]], idx: &[usize]) -> f64 {
    let n = idx.len() as f64;
    let mx = idx.iter().map(|&j| phi[j][0]).sum::<f64>() / n;
    let my = idx.iter().map(|&j| phi[j][1]).sum::<f64>() / n;
    idx.iter().map(|&j| (phi[j][0] - mx).powi(2) + (phi[j][1] - my).powi(2)).sum()
}

/// Exhaustive Ward: score = -(increase of the within-parcel sum of squares).
pub fn ward_oracle(phi: &[[f64; 2]], width: usize, height: usize, target: usize) -> (Vec<usize>, Vec<OracleMerge>) {
    greedy(width, height, target, |a, b| {
        let u = [a, b].concat();
        -(scatter(phi, &u) - scatter(phi, a) - scatter(phi, b))
    })
}

/// Least squares through the normal equations, Gaussian elimination with
/// partial pivoting. `x` is row-major `n x k`.
pub fn normal_equations(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let k = x[0].len();
    let mut a = vec![vec![0.0; k + 1]; k];
    for (row, &yi) in x.iter().zip(y) {
        for r in 0..k {
            for c in 0..k {
                a[r][c] += row[r] * row[c];
            }
            a[r][k] += row[r] * yi;
        }
    }
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        for r in col + 1..k {
            let f = a[r][col] / a[col][col];
            for c in col..=k {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut b = vec![0.0; k];
    for r in (0..k).rev() {
        let s: f64 = (r + 1..k).map(|c| a[r][c] * b[c]).sum();
        b[r] = (a[r][k] - s) / a[r][r];
    }
    b
}

/// Kolmogorov-Smirnov distance of a sample from Uniform(0, 1).
pub fn ks_uniform(sample: &[f64]) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter().enumerate().map(|(i, &p)| ((i + 1) as f64 / n - p).max(p - i as f64 / n)).fold(0.0, f64::max)
}

/// Shannon entropy in nats from label counts.
pub fn entropy(labels: &[usize]) -> f64 {
    let n = labels.len() as f64;
    let mut counts = std::collections::HashMap::new();
    for l in labels {
        *counts.entry(*l).or_insert(0usize) += 1;
    }
    counts.values().map(|&c| c as f64 / n).map(|p| -p * p.ln()).sum()
}

pub fn random_instance(n: usize, seed: u64) -> (Vec<[f64; 2]>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi = (0..n).map(|_| [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]).collect();
    let alpha = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    (phi, alpha)
}

/// Compares a library merge log `(gamma, tau, gain)` with an oracle log.
/// Returns the number of steps whose pair differs or whose score disagrees
/// beyond `tol` (relative to max(1, |score|)).
pub fn count_mismatches(lib: &[(usize, usize, f64)], oracle: &[OracleMerge], tol: f64) -> usize {
    if lib.len() != oracle.len() {
        return lib.len().max(oracle.len());
    }
    lib.iter()
        .zip(oracle)
        .filter(|((g, t, gain), o)| (*g, *t) != o.pair || (gain - o.score).abs() > tol * o.score.abs().max(1.0))
        .count()
}

/// A configuration small enough for end-to-end runs of the binary.
pub const SMALL_CONFIG: &str = r#"version = 1
seed = 11

[phantom]
width = 10
height = 10
blob_radius = 2.0

[phantom.paradigm]
n_scans = 150

[simulate]
noise_variance = 1.0

[mc]
noise_grid = [0.0, 1.0]
runs = 3
refit = true
"#;
