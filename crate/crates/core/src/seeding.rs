//! Seed derivation for independent, reproducible random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 output function.
pub fn mix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the `index`-th stream of kind `tag` under `base`.
pub fn derive_seed(base: u64, tag: u64, index: u64) -> u64 {
    mix64(mix64(base ^ mix64(tag)) ^ index.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

/// Maps 64 random bits to a uniform value in `[0, 1)`.
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn stream_rng(base: u64, tag: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, tag, index))
}

pub const TAG_TERRAIN: u64 = 1;
pub const TAG_NOISE: u64 = 2;
pub const TAG_PLANNER: u64 = 3;
pub const TAG_INIT: u64 = 4;
pub const TAG_SHUFFLE: u64 = 5;
