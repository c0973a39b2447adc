//! Greedy agglomeration maximising the classification log-likelihood of the
//! activation-weighted two-class mixture.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{mixture_loglik, MixtureModel, MixtureParams, ParcelError, ParcelState};
use crate::glmfit::FeatureMap;
use crate::par;
use crate::simgen::Grid2D;

/// A candidate merge of adjacent parcels `parcels.0 < parcels.1`.
///
/// `gain` is the log-ratio of maximised likelihoods after and before the
/// merge, `L(merged) - L(first) - L(second)`; it is usually negative and the
/// best merge is the one with the largest gain (smallest likelihood loss).
#[derive(Debug, Clone, PartialEq)]
pub struct MergeCandidate {
    pub parcels: (usize, usize),
    pub gain: f64,
    pub merged_params: MixtureParams,
    pub merged_loglik: f64,
}

/// One applied merge. For spatial Ward, `gain` is the negated Ward cost so
/// both methods pick the maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeRecord {
    pub step: usize,
    pub gamma: usize,
    pub tau: usize,
    pub gain: f64,
}

fn pair(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

fn evaluate(
    model: &MixtureModel,
    state: &ParcelState,
    features: &FeatureMap,
    (a, b): (usize, usize),
    loglik_a: f64,
    loglik_b: f64,
) -> MergeCandidate {
    let ma = state.members(a).expect("live parcel");
    let mb = state.members(b).expect("live parcel");
    let mut union = Vec::with_capacity(ma.len() + mb.len());
    union.extend_from_slice(ma);
    union.extend_from_slice(mb);
    union.sort_unstable();
    let merged_params = model.fit(&union, features);
    let merged_loglik = mixture_loglik(&union, &merged_params, features);
    MergeCandidate { parcels: (a, b), gain: merged_loglik - loglik_a - loglik_b, merged_params, merged_loglik }
}

/// Evaluates the merge of adjacent parcels `gamma` and `tau` from scratch,
/// fitting all three parameter sets.
pub fn merge_gain(
    state: &ParcelState,
    gamma: usize,
    tau: usize,
    features: &FeatureMap,
) -> Result<MergeCandidate, ParcelError> {
    if gamma == tau || !state.are_adjacent(gamma, tau) {
        return Err(ParcelError::NotAdjacent(gamma, tau));
    }
    let model = MixtureModel::from_features(features);
    let ll = |id: usize| {
        let m = state.members(id).expect("adjacent parcels exist");
        mixture_loglik(m, &model.fit(m, features), features)
    };
    let (a, b) = pair(gamma, tau);
    Ok(evaluate(&model, state, features, (a, b), ll(a), ll(b)))
}

/// Stepwise IGMM agglomeration. Each step merges the adjacent pair with the
/// largest gain, breaking exact ties by the smallest `(min id, max id)` pair.
/// Only candidates touching the merged parcel are re-evaluated.
pub struct IgmmAgglomerator<'a> {
    features: &'a FeatureMap,
    model: MixtureModel,
    state: ParcelState,
    loglik: BTreeMap<usize, f64>,
    candidates: BTreeMap<(usize, usize), MergeCandidate>,
    step: usize,
}

impl<'a> IgmmAgglomerator<'a> {
    pub fn new(features: &'a FeatureMap, grid: Grid2D) -> Result<Self, ParcelError> {
        if features.len() != grid.n_voxels() {
            return Err(ParcelError::SizeMismatch { features: features.len(), voxels: grid.n_voxels() });
        }
        let model = MixtureModel::from_features(features);
        let mut state = ParcelState::singletons(grid);
        let fits = par::map_range(grid.n_voxels(), |j| {
            let p = model.fit(&[j], features);
            (p, mixture_loglik(&[j], &p, features))
        });
        let mut loglik = BTreeMap::new();
        for (j, (p, ll)) in fits.into_iter().enumerate() {
            state.params.insert(j, p);
            loglik.insert(j, ll);
        }
        let pairs = state.adjacent_pairs();
        let evaluated =
            par::map_slice(&pairs, |&(a, b)| evaluate(&model, &state, features, (a, b), loglik[&a], loglik[&b]));
        let candidates = pairs.into_iter().zip(evaluated).collect();
        Ok(Self { features, model, state, loglik, candidates, step: 0 })
    }

    pub fn state(&self) -> &ParcelState {
        &self.state
    }

    pub fn into_state(self) -> ParcelState {
        self.state
    }

    pub fn model(&self) -> &MixtureModel {
        &self.model
    }

    /// Current candidate set keyed by `(min id, max id)`.
    pub fn candidates(&self) -> &BTreeMap<(usize, usize), MergeCandidate> {
        &self.candidates
    }

    /// The merge the next step would apply.
    pub fn best_candidate(&self) -> Option<&MergeCandidate> {
        // strict comparison in key order keeps the smallest pair on ties
        self.candidates.values().fold(None, |best: Option<&MergeCandidate>, c| match best {
            Some(b) if c.gain <= b.gain => Some(b),
            _ => Some(c),
        })
    }

    /// Applies the best merge; `None` once a single parcel remains.
    pub fn step(&mut self) -> Option<MergeRecord> {
        let best = self.best_candidate()?.clone();
        let (a, b) = best.parcels;
        let keep = self.state.merge(a, b).expect("candidates are adjacent");
        self.candidates.retain(|&(x, y), _| x != a && x != b && y != a && y != b);
        self.loglik.remove(&a);
        self.loglik.remove(&b);
        self.loglik.insert(keep, best.merged_loglik);
        self.state.params.insert(keep, best.merged_params);

        let neighbors: Vec<usize> = self.state.neighbors(keep).collect();
        let (state, features, model, loglik) = (&self.state, self.features, &self.model, &self.loglik);
        let fresh = par::map_slice(&neighbors, |&n| {
            let p = pair(keep, n);
            evaluate(model, state, features, p, loglik[&p.0], loglik[&p.1])
        });
        for c in fresh {
            self.candidates.insert(c.parcels, c);
        }
        let record = MergeRecord { step: self.step, gamma: a, tau: b, gain: best.gain };
        self.step += 1;
        Some(record)
    }

    /// Merges until `target` parcels remain, returning the merge log.
    pub fn run_to(&mut self, target: usize) -> Result<Vec<MergeRecord>, ParcelError> {
        check_target(target, self.state.n_parcels())?;
        let mut log = Vec::with_capacity(self.state.n_parcels() - target);
        while self.state.n_parcels() > target {
            match self.step() {
                Some(r) => log.push(r),
                // disconnected grids cannot occur; guard anyway
                None => return Err(ParcelError::Stuck { remaining: self.state.n_parcels() }),
            }
        }
        Ok(log)
    }
}

pub(crate) fn check_target(target: usize, available: usize) -> Result<(), ParcelError> {
    if target == 0 || target > available {
        Err(ParcelError::InvalidTarget { target, available })
    } else {
        Ok(())
    }
}

/// IGMM parcellation from singletons down to `target_parcels` parcels.
pub fn igmm_agglomerate(
    features: &FeatureMap,
    grid: Grid2D,
    target_parcels: usize,
) -> Result<ParcelState, ParcelError> {
    igmm_agglomerate_logged(features, grid, target_parcels).map(|(s, _)| s)
}

/// As [`igmm_agglomerate`], also returning the merge log.
pub fn igmm_agglomerate_logged(
    features: &FeatureMap,
    grid: Grid2D,
    target_parcels: usize,
) -> Result<(ParcelState, Vec<MergeRecord>), ParcelError> {
    check_target(target_parcels, grid.n_voxels())?;
    let mut agg = IgmmAgglomerator::new(features, grid)?;
    let log = agg.run_to(target_parcels)?;
    Ok((agg.into_state(), log))
}
