//! Seed derivation.
//!
//! Each fold fit gets its own 64-bit seed derived from the master seed and
//! the fold coordinates by a splitmix64-style mixer, so fits can run in any
//! order (or in parallel) without changing results.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combine a seed with one more word.
#[inline]
pub fn mix_in(seed: u64, word: u64) -> u64 {
    mix(seed ^ word.wrapping_mul(GOLDEN).wrapping_add(GOLDEN))
}

/// Per-fit seed for fold `(rep, fold)` under `master`.
#[inline]
pub fn derive_fit_seed(master: u64, rep: usize, fold: usize) -> u64 {
    mix_in(mix_in(mix_in(master, 0x666f_6c64), rep as u64), fold as u64)
}

/// Per-repetition seed used to shuffle one partition.
#[inline]
pub fn derive_partition_seed(master: u64, rep: usize) -> u64 {
    mix_in(mix_in(master, 0x7061_7274), rep as u64)
}

/// Seed for stochastic density evaluation of observation `obs` under the
/// model fitted with `fit_seed`.
#[inline]
pub fn derive_eval_seed(fit_seed: u64, obs: usize) -> u64 {
    mix_in(mix_in(fit_seed, 0x6576_616c), obs as u64)
}
