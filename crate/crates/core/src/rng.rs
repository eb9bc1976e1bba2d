//! Seeded random streams.
//!
//! Every draw in the crate comes from a `(seed, stream)` pair: the seed picks
//! the ChaCha key and the stream id picks one of its independent 2^64 streams.
//! Stream ids are built from small integer paths such as `[rep, purpose]`, so
//! results never depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream purposes used by the simulation and diagnostics.
pub mod purpose {
    pub const TRAIN_DESIGN: u64 = 1;
    pub const TRAIN_NOISE: u64 = 2;
    pub const TEST_DESIGN: u64 = 3;
    pub const TEST_NOISE: u64 = 4;
    pub const METHOD: u64 = 5;
    pub const CONE: u64 = 6;
    pub const MONTE_CARLO: u64 = 7;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for the stream addressed by `path` under `seed`.
pub fn stream(seed: u64, path: &[u64]) -> ChaCha8Rng {
    let id = path
        .iter()
        .fold(0x6A09_E667_F3BC_C908u64, |acc, &x| splitmix(acc ^ splitmix(x)));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
