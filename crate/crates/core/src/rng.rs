//! Seed derivation and the run PRNG.
//!
//! Every random decision in a simulation draws from a [`RunRng`] whose seed is
//! derived from `(master_seed, seed_index, stream)` with [`mix_seed`]. The
//! mixing step is the SplitMix64 finalizer applied after each absorbed word,
//! so any single run can be reproduced without replaying the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RunRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a sequence of words into one 64-bit seed.
pub fn mix_seed(words: &[u64]) -> u64 {
    words.iter().fold(0u64, |acc, &w| splitmix64(acc ^ splitmix64(w)))
}

pub fn run_rng(seed: u64) -> RunRng {
    ChaCha8Rng::seed_from_u64(seed)
}
