//! Density-estimator families and the shared fit/evaluate/sample contract.

pub mod estimator;
pub mod gaussian;
pub mod gmm;
pub mod kde;
pub mod linalg;
pub mod linear_gaussian;
pub mod vae;

/// Floor applied to every Gaussian variance so duplicated points cannot
/// produce degenerate log-densities.
pub const VARIANCE_FLOOR: f64 = 1e-6;
