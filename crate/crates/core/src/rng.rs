//! Seed derivation. Every random stream in the crate is a ChaCha8 generator
//! keyed by a master seed and a path of integer tags, so streams for
//! different purposes (split, init, epoch shuffle, views, trials) never overlap
//! and can be regenerated individually.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with a tag path into a new 64-bit seed.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

/// Opens the stream identified by `(seed, tags)`.
pub fn stream(seed: u64, tags: &[u64]) -> Stream {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tags))
}

/// Tags used to partition the master seed.
pub mod tag {
    pub const SPLIT: u64 = 1;
    pub const INIT: u64 = 2;
    pub const SHUFFLE: u64 = 3;
    pub const NEGATIVES: u64 = 4;
    pub const VIEW_A: u64 = 5;
    pub const VIEW_B: u64 = 6;
    pub const TRIAL: u64 = 7;
}
