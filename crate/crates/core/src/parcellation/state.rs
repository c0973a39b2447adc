use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{MixtureParams, ParcelError};
use crate::simgen::Grid2D;

/// A partition of the grid into spatially connected parcels.
///
/// Parcel ids are voxel indices: every parcel starts as a singleton named
/// after its voxel, and a merge keeps the smaller id.
#[derive(Debug, Clone, PartialEq)]
pub struct ParcelState {
    grid: Grid2D,
    labels: Vec<usize>,
    members: BTreeMap<usize, Vec<usize>>,
    adjacency: BTreeMap<usize, BTreeSet<usize>>,
    /// Mixture parameters per parcel; empty for methods that do not use them.
    pub params: BTreeMap<usize, MixtureParams>,
}

impl ParcelState {
    /// One parcel per voxel.
    pub fn singletons(grid: Grid2D) -> Self {
        let j = grid.n_voxels();
        let members = (0..j).map(|v| (v, vec![v])).collect();
        let adjacency = (0..j).map(|v| (v, grid.neighbors(v).collect())).collect();
        Self { grid, labels: (0..j).collect(), members, adjacency, params: BTreeMap::new() }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    /// Parcel id of every voxel.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_parcels(&self) -> usize {
        self.members.len()
    }

    pub fn parcel_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.keys().copied()
    }

    /// Sorted voxel indices of parcel `id`.
    pub fn members(&self, id: usize) -> Option<&[usize]> {
        self.members.get(&id).map(Vec::as_slice)
    }

    pub fn neighbors(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency.get(&id).into_iter().flatten().copied()
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacency.get(&a).is_some_and(|s| s.contains(&b))
    }

    /// All adjacent pairs `(a, b)` with `a < b`, in lexicographic order.
    pub fn adjacent_pairs(&self) -> Vec<(usize, usize)> {
        self.adjacency.iter().flat_map(|(&a, ns)| ns.range(a + 1..).map(move |&b| (a, b))).collect()
    }

    /// Merges two adjacent parcels; the result keeps the smaller id, which is
    /// returned.
    pub fn merge(&mut self, a: usize, b: usize) -> Result<usize, ParcelError> {
        if a == b || !self.are_adjacent(a, b) {
            return Err(ParcelError::NotAdjacent(a, b));
        }
        let (keep, gone) = (a.min(b), a.max(b));
        let moved = self.members.remove(&gone).expect("adjacent parcels exist");
        for &v in &moved {
            self.labels[v] = keep;
        }
        let kept = self.members.get_mut(&keep).expect("adjacent parcels exist");
        kept.extend(moved);
        kept.sort_unstable();

        let gone_adj = self.adjacency.remove(&gone).unwrap_or_default();
        for &n in &gone_adj {
            if let Some(s) = self.adjacency.get_mut(&n) {
                s.remove(&gone);
                if n != keep {
                    s.insert(keep);
                }
            }
        }
        let keep_adj = self.adjacency.get_mut(&keep).expect("adjacent parcels exist");
        keep_adj.extend(gone_adj.into_iter().filter(|&n| n != keep));
        self.params.remove(&gone);
        self.params.remove(&keep);
        Ok(keep)
    }

    /// Labels renumbered `0..n_parcels` in increasing parcel-id order.
    pub fn dense_labels(&self) -> Vec<usize> {
        let index: BTreeMap<usize, usize> = self.members.keys().enumerate().map(|(i, &id)| (id, i)).collect();
        self.labels.iter().map(|l| index[l]).collect()
    }

    /// Checks label/member consistency, adjacency derivation and parcel
    /// connectivity. Intended for tests and debug assertions.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (&id, ms) in &self.members {
            if ms.is_empty() {
                return Err(format!("parcel {id} is empty"));
            }
            if let Some(&v) = ms.iter().find(|&&v| self.labels[v] != id) {
                return Err(format!("voxel {v} listed in {id} but labelled {}", self.labels[v]));
            }
        }
        let total: usize = self.members.values().map(Vec::len).sum();
        if total != self.labels.len() {
            return Err(format!("{total} memberships for {} voxels", self.labels.len()));
        }
        let mut derived: BTreeMap<usize, BTreeSet<usize>> =
            self.members.keys().map(|&id| (id, BTreeSet::new())).collect();
        for (u, v) in self.grid.edges() {
            let (a, b) = (self.labels[u], self.labels[v]);
            if a != b {
                derived.get_mut(&a).unwrap().insert(b);
                derived.get_mut(&b).unwrap().insert(a);
            }
        }
        if derived != self.adjacency {
            return Err("adjacency does not match the voxel grid".into());
        }
        if !labels_connected(&self.grid, &self.labels) {
            return Err("a parcel is not 4-connected".into());
        }
        Ok(())
    }
}

/// Whether every label class is a single 4-connected component (flood fill).
pub fn labels_connected(grid: &Grid2D, labels: &[usize]) -> bool {
    let mut seen = vec![false; labels.len()];
    let mut started = BTreeSet::new();
    for s in 0..labels.len() {
        if seen[s] {
            continue;
        }
        if !started.insert(labels[s]) {
            return false;
        }
        let mut queue = VecDeque::from([s]);
        seen[s] = true;
        while let Some(v) = queue.pop_front() {
            for n in grid.neighbors(v) {
                if !seen[n] && labels[n] == labels[s] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            }
        }
    }
    true
}

/// Number of 4-connected components of the label image.
pub fn connected_components(grid: &Grid2D, labels: &[usize]) -> usize {
    let mut seen = vec![false; labels.len()];
    let mut count = 0;
    for s in 0..labels.len() {
        if seen[s] {
            continue;
        }
        count += 1;
        let mut queue = VecDeque::from([s]);
        seen[s] = true;
        while let Some(v) = queue.pop_front() {
            for n in grid.neighbors(v) {
                if !seen[n] && labels[n] == labels[s] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            }
        }
    }
    count
}
