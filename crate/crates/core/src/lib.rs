//! Hemodynamically informed parcellation of fMRI data.
//!
//! The crate covers the whole pipeline: synthetic BOLD generation
//! ([`simgen`]), GLM feature extraction with activation statistics
//! ([`glmfit`]), activation-weighted Gaussian-mixture agglomeration and a
//! spatial Ward baseline ([`parcellation`]), evaluation ([`eval`]) and the
//! file-based orchestration used by the command-line tool ([`pipeline`]).

// NaN-rejecting `!(x > 0.0)` checks and index loops over small matrices are intended
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod drift;
pub mod eval;
pub mod glmfit;
pub mod par;
pub mod parcellation;
pub mod pipeline;
pub mod seed;
pub mod simgen;
