use serde::{Deserialize, Serialize};

use super::SimError;

/// Rectangular voxel lattice with 4-neighbour connectivity.
///
/// Voxel `j` sits at column `j % width`, row `j / width`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid2D {
    width: usize,
    height: usize,
}

impl Grid2D {
    pub fn new(width: usize, height: usize) -> Result<Self, SimError> {
        if width == 0 || height == 0 {
            return Err(SimError::InvalidGrid { width, height });
        }
        Ok(Self { width, height })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_voxels(&self) -> usize {
        self.width * self.height
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    pub fn coords(&self, j: usize) -> (usize, usize) {
        (j % self.width, j / self.width)
    }

    /// The 4-connected neighbours of voxel `j`, in increasing index order.
    pub fn neighbors(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        let (x, y) = self.coords(j);
        let up = (y > 0).then(|| j - self.width);
        let left = (x > 0).then(|| j - 1);
        let right = (x + 1 < self.width).then(|| j + 1);
        let down = (y + 1 < self.height).then(|| j + self.width);
        [up, left, right, down].into_iter().flatten()
    }

    /// Every unordered adjacent voxel pair `(a, b)` with `a < b`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.n_voxels()).flat_map(|j| self.neighbors(j).filter(move |&k| k > j).map(move |k| (j, k))).collect()
    }
}
