//! Positional seed derivation.
//!
//! Every random stream in the crate is keyed by a base seed plus a path of
//! integers (voxel index, noise level index, run index, ...). The derived
//! seed depends only on that path, never on the order in which streams are
//! created.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags, so that streams derived from the same base and indices but
/// serving different purposes never collide.
pub mod tag {
    pub const PARADIGM: u64 = 0x5041_5241;
    pub const AMPLITUDE: u64 = 0x414d_504c;
    pub const VOXEL: u64 = 0x564f_5845;
    pub const RUN: u64 = 0x5255_4e00;
    pub const NOISE_TEST: u64 = 0x544e_4f49;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `base` and a path of indices.
pub fn derive(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// A reproducible generator for the stream at `path` under `base`.
pub fn rng(base: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(base, path))
}
