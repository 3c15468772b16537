//! Counter-based seed splitting.
//!
//! Every trial derives its own seed from `(master_seed, trial_index)` and every
//! random purpose inside a trial draws from its own ChaCha stream, so a single
//! trial can be replayed in isolation and adding a consumer never shifts the
//! draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random purposes inside one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Support = 1,
    Amplitudes = 2,
    Matrices = 3,
    Noise = 4,
    Topology = 5,
    Sampling = 6,
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for trial `trial_index` under `master_seed`.
pub fn trial_seed(master_seed: u64, trial_index: u64) -> u64 {
    splitmix64(splitmix64(master_seed) ^ splitmix64(trial_index.wrapping_add(0xA5A5_A5A5)))
}

/// Generator for one purpose within a trial.
pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
