//! Float helpers for `no_std` builds.
//!
//! Transcendental methods on `f64` live in `std`, not `core`, so the crate
//! routes them through `libm` via an extension trait. Using `libm`
//! unconditionally also keeps results bit-identical across platforms.

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub trait F64Ext {
    fn exp(self) -> f64;
    fn expm1(self) -> f64;
    fn ln(self) -> f64;
    fn ln_1p(self) -> f64;
    fn sqrt(self) -> f64;
    fn powf(self, e: f64) -> f64;
    fn powi2(self) -> f64;
    fn abs(self) -> f64;
    fn floor(self) -> f64;
    fn ceil(self) -> f64;
    fn cos(self) -> f64;
}

impl F64Ext for f64 {
    #[inline]
    fn exp(self) -> f64 {
        libm::exp(self)
    }
    #[inline]
    fn expm1(self) -> f64 {
        libm::expm1(self)
    }
    #[inline]
    fn ln(self) -> f64 {
        libm::log(self)
    }
    #[inline]
    fn ln_1p(self) -> f64 {
        libm::log1p(self)
    }
    #[inline]
    fn sqrt(self) -> f64 {
        libm::sqrt(self)
    }
    #[inline]
    fn powf(self, e: f64) -> f64 {
        libm::pow(self, e)
    }
    /// `x * x`; named to avoid clashing with the inherent `powi`.
    #[inline]
    fn powi2(self) -> f64 {
        self * self
    }
    #[inline]
    fn abs(self) -> f64 {
        libm::fabs(self)
    }
    #[inline]
    fn floor(self) -> f64 {
        libm::floor(self)
    }
    #[inline]
    fn ceil(self) -> f64 {
        libm::ceil(self)
    }
    #[inline]
    fn cos(self) -> f64 {
        libm::cos(self)
    }
}

/// Numerically stable `ln(1 + exp(x))`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softplus_matches_naive_in_safe_range() {
        for &x in &[-3.0, -0.5, 0.0, 0.5, 3.0] {
            let naive = (1.0 + libm::exp(x)).ln();
            assert!((softplus(x) - naive).abs() < 1e-12);
        }
    }

    #[test]
    fn softplus_no_overflow() {
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
        assert!(softplus(-700.0) > 0.0);
        assert_eq!(softplus(-800.0), 0.0); // graceful underflow, not NaN
    }

    #[test]
    fn sigmoid_logit_roundtrip() {
        for &p in &[1e-6, 0.25, 0.5, 0.75, 1.0 - 1e-6] {
            assert!((sigmoid(logit(p)) - p).abs() < 1e-12);
        }
    }
}
