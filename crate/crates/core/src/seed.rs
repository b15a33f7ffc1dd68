//! Seed derivation for independent, reproducible streams.
//!
//! Every chain owns a ChaCha20 generator. Child seeds are derived from a base
//! seed and a stream index with the SplitMix64 finalizer:
//!
//! ```text
//! child(seed, stream) = mix(seed ^ mix(stream + 0x9E3779B97F4A7C15))
//! mix(x): x ^= x >> 30; x *= 0xBF58476D1CE4E5B9;
//!         x ^= x >> 27; x *= 0x94D049BB133111EB; x ^= x >> 31
//! ```
//!
//! Nested streams (replicate, then grid point) are derived by chaining calls.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type ChainRng = ChaCha20Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut x: u64) -> u64 {
    x ^= x >> 30;
    x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    mix(seed ^ mix(stream.wrapping_add(GOLDEN_GAMMA)))
}

pub fn chain_rng(seed: u64) -> ChainRng {
    ChaCha20Rng::seed_from_u64(seed)
}
