//! Deterministic random number generation.
//!
//! Every stochastic component draws from a [`ChaCha8Rng`] seeded through
//! [`crate::seed`], so runs are reproducible bit-for-bit regardless of
//! execution order.

#[allow(unused_imports)] // false positive: unstable inherent f64 methods shadow the lint
use crate::math::F64Ext;
use rand_core::RngCore;

pub use rand_chacha::ChaCha8Rng;
pub use rand_core::SeedableRng;

/// Uniform draw in `[0, 1)` with 53 bits of precision.
#[inline]
pub fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw in `(0, 1]`, safe as a `ln` argument.
#[inline]
pub fn uniform_open(rng: &mut ChaCha8Rng) -> f64 {
    1.0 - uniform(rng)
}

/// Standard normal draw via the polar Box-Muller method.
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u = 2.0 * uniform(rng) - 1.0;
        let v = 2.0 * uniform(rng) - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            return u * (-2.0 * s.ln() / s).sqrt();
        }
    }
}

/// Laplace draw with the given scale via inverse transform sampling.
pub fn laplace(rng: &mut ChaCha8Rng, scale: f64) -> f64 {
    let u = uniform(rng) - 0.5;
    let mag = (1.0 - 2.0 * u.abs()).ln();
    if u >= 0.0 {
        -scale * mag
    } else {
        scale * mag
    }
}

/// Uniform draw from `0..bound`. Uses rejection to avoid modulo bias.
pub fn uniform_index(rng: &mut ChaCha8Rng, bound: usize) -> usize {
    debug_assert!(bound > 0);
    let bound = bound as u64;
    let zone = u64::MAX - (u64::MAX % bound);
    loop {
        let v = rng.next_u64();
        if v < zone {
            return (v % bound) as usize;
        }
    }
}

/// Fisher-Yates shuffle of `items`.
pub fn shuffle<T>(rng: &mut ChaCha8Rng, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = uniform_index(rng, i + 1);
        items.swap(i, j);
    }
}
