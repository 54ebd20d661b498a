//! Seeded random streams.
//!
//! The generator family is ChaCha8 (`rand_chacha`). Stream `i` of seed `s`
//! is seeded with `s ^ splitmix64(i)`, so a run is reproducible from the
//! seed alone and independent of how streams are spread over threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Name of the pinned generator family, recorded in experiment outputs.
pub const GENERATOR_FAMILY: &str = "chacha8";

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream(seed: u64, i: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed ^ splitmix64(i))
}
