//! Counter-derived random streams.
//!
//! Every unit of Monte Carlo work (a replication, an observation) draws from
//! its own ChaCha stream selected by a key path, so results never depend on
//! how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a key path into a single 64-bit value.
pub fn mix(keys: &[u64]) -> u64 {
    keys.iter()
        .fold(0x6A09_E667_F3BC_C908, |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

/// Stream for `keys` under `seed`.
pub fn substream(seed: u64, keys: &[u64]) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(mix(keys));
    rng
}

/// A fresh seed derived from `seed` and a key path, for handing to code that
/// derives its own substreams.
pub fn derive_seed(seed: u64, keys: &[u64]) -> u64 {
    splitmix64(seed ^ mix(keys))
}
