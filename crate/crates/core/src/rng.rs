//! Seed handling.
//!
//! Every random quantity is drawn from a ChaCha8 generator keyed by a 64-bit
//! seed and a stream id. ChaCha is counter based, so streams are independent
//! and a draw never depends on how work was scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream carrying the Gaussian budget `g`.
pub const STREAM_GAUSSIAN: u64 = 0;
/// Stream carrying random sign diagonals.
pub const STREAM_SIGNS: u64 = 1;
/// Stream carrying the sparse `h` vectors of low-displacement-rank models.
pub const STREAM_LDR: u64 = 2;
/// Stream used by Monte-Carlo oracles and experiment drivers.
pub const STREAM_EXPERIMENT: u64 = 3;

/// Seed used by the CLI when none is given.
pub const DEFAULT_SEED: u64 = 0x5EED;

/// A generator for `(seed, stream)`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives a child seed from `(seed, index)` with the splitmix64 finalizer.
///
/// Used for repetitions, pipeline components and parallel tasks so that each
/// task's randomness is a pure function of its index.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
