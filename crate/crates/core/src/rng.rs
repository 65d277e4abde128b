//! Counter-style random streams: every draw is a pure function of
//! `(seed, stream)`, so realizations and steps never share mutable state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const SPIN_UP_STREAM: u64 = u64::MAX;
pub(crate) const MISMATCH_STREAM: u64 = u64::MAX - 1;

/// The splitmix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of realization `id` derived from the base seed.
pub fn realization_seed(base_seed: u64, id: u64) -> u64 {
    base_seed ^ splitmix64(id)
}

/// Independent generator for `(seed, stream)`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
