//! Seed derivation for reproducible, scheduling-independent random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 generator whose
//! seed is a pure function of a master seed and a path of indices (grid cell,
//! replication, permutation, ...). Work can then be split across threads in
//! any order without changing a single drawn value.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags used to separate the roles a seed can play.
pub mod tag {
    pub const DATA: u64 = 0x6461_7461;
    pub const PERMUTATION: u64 = 0x7065_726d;
    pub const POPULATION: u64 = 0x706f_7075;
    pub const DRAW: u64 = 0x6472_6177;
    pub const DIAGNOSTIC: u64 = 0x6469_6167;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `base` and a path of indices.
pub fn derive(base: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(base), |acc, &k| splitmix64(acc ^ splitmix64(k.wrapping_add(0x5851_f42d_4c95_7f2d))))
}

/// Generator for the given seed.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for `(seed, stream)`, using ChaCha's native stream selection.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}
