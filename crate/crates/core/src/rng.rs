//! Seed derivation helpers.
//!
//! All randomness in the crate flows through ChaCha8 streams so that a run is
//! reproducible from a single `u64` seed on any platform. Distinct purposes
//! (weight init, split shuffling, each sampler) get decorrelated sub-seeds via
//! a splitmix64 mix of the base seed and a purpose tag.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags for [`derive_seed`]. Keeping them in one place avoids
/// accidental stream collisions between pipeline stages.
pub mod tags {
    pub const SPLIT: u64 = 1;
    pub const INIT: u64 = 2;
    pub const OBJECTIVE_BATCH: u64 = 3;
    pub const CONSTRAINT_JACOBIAN_BATCH: u64 = 4;
    pub const CONSTRAINT_VALUE_BATCH: u64 = 5;
    pub const CONSTRAINT_ESTIMATE_BATCH: u64 = 6;
    pub const ORACLE_NOISE: u64 = 7;
}

/// splitmix64 over `seed ^ mix(tag)`; statistically independent streams for
/// distinct tags.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// RNG for a (seed, step) pair: same seed, independent ChaCha stream per step.
pub fn rng_for_step(seed: u64, step: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step);
    rng
}
