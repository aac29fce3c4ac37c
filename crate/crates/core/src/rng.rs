//! Seeded random streams.
//!
//! All stochastic code in the workspace draws from ChaCha8. The 256-bit key is
//! expanded from the user seed with `SeedableRng::seed_from_u64`, and the
//! 64-bit ChaCha stream id is the SplitMix64 fold of a short key path such as
//! `[DOMAIN_TRAJECTORY, window, channel]`. Two generators with the same seed
//! and key path produce the same sequence on every platform, which is what
//! lets parallel and serial generation agree bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DOMAIN_TRAJECTORY: u64 = 1;
pub const DOMAIN_DATASET: u64 = 2;
pub const DOMAIN_MONTE_CARLO: u64 = 3;
pub const DOMAIN_BOOTSTRAP: u64 = 4;
pub const DOMAIN_KFOLD: u64 = 5;
pub const DOMAIN_WAVEFORM: u64 = 6;
pub const DOMAIN_MODEL: u64 = 7;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream id for a key path.
pub fn stream_id(path: &[u64]) -> u64 {
    path.iter().fold(0u64, |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

/// Independent generator for `(seed, path)`.
pub fn stream(seed: u64, path: &[u64]) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(path));
    rng
}

/// Derive a child seed, used where an API takes a plain `u64` seed.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    splitmix64(seed ^ stream_id(path))
}
