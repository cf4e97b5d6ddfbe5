//! Seed derivation.
//!
//! Every random stream in the crate is a `ChaCha8Rng` whose seed is derived
//! from a base seed and a stable key (speaker id, utterance id, restart
//! index, ...). Results therefore do not depend on iteration order or on the
//! number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

// splitmix64 finaliser
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from `base` and a string key.
pub fn derive(base: u64, key: &str) -> u64 {
    mix(base ^ mix(fnv1a(key.as_bytes())))
}

/// Derive a child seed from `base` and an integer key.
pub fn derive_index(base: u64, index: u64) -> u64 {
    mix(base ^ mix(index.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
