//! Low-frequency cosine drift basis shared by the simulator and the GLM.

use nalgebra::DMatrix;

/// Orthonormal DCT-II basis with `order` columns, the first being the
/// constant regressor. Returns an `n_scans x order` matrix.
pub fn dct_basis(n_scans: usize, order: usize) -> DMatrix<f64> {
    let n = n_scans as f64;
    DMatrix::from_fn(n_scans, order, |i, k| {
        if k == 0 {
            1.0 / n.sqrt()
        } else {
            (2.0 / n).sqrt() * (std::f64::consts::PI * k as f64 * (2.0 * i as f64 + 1.0) / (2.0 * n)).cos()
        }
    })
}
