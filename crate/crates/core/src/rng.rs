//! Seed derivation. Every random stream in a run is a ChaCha generator keyed
//! by the run seed and a purpose-specific stream id, so adding draws to one
//! stream never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub mod stream {
    pub const SCENARIO: u64 = 1;
    pub const POLICY: u64 = 2;
    pub const REPLAY: u64 = 3;
    pub const CHANNEL: u64 = 4;
    pub const INIT: u64 = 5;
    pub const EVAL: u64 = 6;
}

/// Generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a seed with an index (episode number, repeat number, ...) into a
/// new seed. SplitMix64 finalizer.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
