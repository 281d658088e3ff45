//! Counter-based random streams.
//!
//! Every Monte-Carlo round draws from its own ChaCha stream selected by the
//! round index, so results do not depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for substream `stream` of the master `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives an independent master seed for a labelled sub-experiment.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
