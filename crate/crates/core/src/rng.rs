//! Seed derivation.
//!
//! Every stochastic component draws from its own ChaCha stream keyed by
//! `(base seed, purpose, index)`, so independent runs never share state and
//! two components that must stay aligned (plain and adaptive training, for
//! instance) consume identical sequences.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn tag_hash(tag: &str) -> u64 {
    // FNV-1a
    tag.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Derives a child seed from a base seed, a purpose tag and an index.
pub fn derive_seed(base: u64, tag: &str, index: u64) -> u64 {
    splitmix64(splitmix64(base ^ tag_hash(tag)) ^ splitmix64(index.wrapping_add(1)))
}

pub fn stream(base: u64, tag: &str, index: u64) -> Rng {
    Rng::seed_from_u64(derive_seed(base, tag, index))
}
