//! Deterministic random streams.
//!
//! Every trial, draw or stage gets its own ChaCha8 stream selected by a
//! tuple of indices, so results do not depend on execution order or on the
//! number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for the stream identified by `indices` under the master `seed`.
pub fn stream(seed: u64, indices: &[u64]) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = indices
        .iter()
        .fold(0x5EED_u64, |acc, &i| mix(acc ^ mix(i.wrapping_add(1))));
    rng.set_stream(id);
    rng
}

/// Derives a child seed, for APIs that take a plain `u64` seed.
pub fn derive_seed(seed: u64, indices: &[u64]) -> u64 {
    indices.iter().fold(mix(seed), |acc, &i| mix(acc ^ mix(i)))
}
