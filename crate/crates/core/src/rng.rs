//! Named random substreams.
//!
//! Every random decision in the engine derives from one user seed. Each
//! consumer (parameter init, dropout, splitting, shuffling, synthetic data)
//! draws from its own ChaCha stream so that changing how one consumer uses
//! randomness never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init = 1,
    Dropout = 2,
    Split = 3,
    Synth = 4,
    Shuffle = 5,
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for `stream` under `seed`.
pub fn substream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Generator for `stream` under `seed`, further keyed by `path`
/// (e.g. epoch and example index). Independent of call order.
pub fn keyed(seed: u64, stream: Stream, path: &[u64]) -> ChaCha8Rng {
    let mut k = mix(seed);
    for &p in path {
        k = mix(k ^ p);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(k);
    rng.set_stream(stream as u64);
    rng
}
