//! Kernel density estimation with an isotropic Gaussian kernel.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{CoreError, Result};
#[allow(unused_imports)] // false positive: unstable inherent f64 methods shadow the lint
use crate::math::{F64Ext, LN_2PI};
use crate::numerics::log_mean_exp;
use crate::rng::{standard_normal, uniform_index, ChaCha8Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Bandwidth {
    /// Fixed positive bandwidth.
    Fixed(f64),
    /// Silverman's rule of thumb: `1.06 * sigma_j * n^(-1/5)` per dimension,
    /// combined by geometric mean into one isotropic bandwidth.
    Silverman,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeParams {
    /// Retained training matrix, row-major `n x dim`.
    pub points: Vec<f64>,
    pub dim: usize,
    pub bandwidth: f64,
}

impl KdeParams {
    pub fn n(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Log-density of the kernel centered at retained point `i`.
    pub fn kernel_log_density(&self, i: usize, x: &[f64]) -> f64 {
        let h2 = self.bandwidth * self.bandwidth;
        let d = self.dim as f64;
        let sq: f64 = self
            .point(i)
            .iter()
            .zip(x)
            .map(|(p, x)| (p - x) * (p - x))
            .sum();
        -0.5 * d * (LN_2PI + h2.ln()) - sq / (2.0 * h2)
    }
}

/// Retain all points and resolve the bandwidth rule.
pub fn fit_kde(data: &Dataset, bandwidth: Bandwidth) -> Result<KdeParams> {
    let h = match bandwidth {
        Bandwidth::Fixed(h) => {
            if h <= 0.0 {
                return Err(CoreError::InvalidArgument(alloc::format!(
                    "bandwidth must be positive, got {h}"
                )));
            }
            h
        }
        Bandwidth::Silverman => silverman_bandwidth(data),
    };
    Ok(KdeParams {
        points: data.values().to_vec(),
        dim: data.dim(),
        bandwidth: h,
    })
}

/// Per-dimension Silverman factor, reduced to one isotropic value by the
/// geometric mean. Falls back to 1 when every column is constant.
pub fn silverman_bandwidth(data: &Dataset) -> f64 {
    let n = data.n() as f64;
    let factor = 1.06 * n.powf(-0.2);
    // Sample standard deviation (n - 1 normalization).
    let correction = if data.n() > 1 { n / (n - 1.0) } else { 1.0 };
    let mut log_sum = 0.0;
    let mut live = 0usize;
    for v in data.column_variances() {
        let sd = (v * correction).sqrt();
        if sd > 0.0 {
            log_sum += (factor * sd).ln();
            live += 1;
        }
    }
    if live == 0 {
        1.0
    } else {
        (log_sum / live as f64).exp()
    }
}

/// `log mean_i K_h(x - x_i)` over all retained points.
pub fn kde_log_density(params: &KdeParams, x: &[f64]) -> Result<f64> {
    if x.len() != params.dim {
        return Err(CoreError::DimensionMismatch {
            expected: params.dim,
            got: x.len(),
        });
    }
    let kernels: Vec<f64> = (0..params.n())
        .map(|i| params.kernel_log_density(i, x))
        .collect();
    log_mean_exp(&kernels)
}

/// Pick a retained point uniformly, then add kernel noise.
pub fn kde_sample(params: &KdeParams, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let i = uniform_index(rng, params.n());
    params
        .point(i)
        .iter()
        .map(|p| p + params.bandwidth * standard_normal(rng))
        .collect()
}
