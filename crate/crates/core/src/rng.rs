//! Counter-based random substreams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 generator
//! seeded with the user's master seed and positioned on a stream selected by
//! a counter (permutation index, subject index, replicate, Monte Carlo
//! chunk). The stream a value comes from depends only on that counter, never
//! on which worker thread happened to run it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for stream `stream` of `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed for an independent child computation, e.g. replicate `index` of a
/// simulation study. SplitMix64 finalizer over `(seed, tag, index)`.
pub fn derive_seed(seed: u64, tag: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
