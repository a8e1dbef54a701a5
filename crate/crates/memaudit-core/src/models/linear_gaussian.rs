//! Closed-form marginal of a linear Gaussian decoder.
//!
//! With `z ~ N(0, I)`, `x | z ~ N(W z + b, sigma2 I)`, the marginal is
//! `x ~ N(b, W W^T + sigma2 I)`. Used as the exact reference the
//! importance-sampled VAE marginal is checked against.

use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::models::linalg::{cholesky, mvn_log_density_chol, Matrix};

/// Log-density of `N(b, W W^T + sigma2 I)` at `x`.
pub fn linear_gaussian_log_marginal(w: &Matrix, b: &[f64], sigma2: f64, x: &[f64]) -> Result<f64> {
    let d_obs = w.rows;
    if b.len() != d_obs || x.len() != d_obs {
        return Err(CoreError::DimensionMismatch {
            expected: d_obs,
            got: x.len(),
        });
    }
    if sigma2 <= 0.0 {
        return Err(CoreError::InvalidArgument(
            "observation variance must be positive".into(),
        ));
    }
    let mut cov = Matrix::zeros(d_obs, d_obs);
    for i in 0..d_obs {
        for j in 0..d_obs {
            let mut v: f64 = (0..w.cols).map(|k| w.get(i, k) * w.get(j, k)).sum();
            if i == j {
                v += sigma2;
            }
            cov.set(i, j, v);
        }
    }
    let chol = cholesky(&cov)?;
    let centered: Vec<f64> = x.iter().zip(b).map(|(x, b)| x - b).collect();
    Ok(mvn_log_density_chol(&chol, &centered))
}

#[cfg(test)]
mod tests {
    use super::*;
    #[allow(unused_imports)] // false positive: see math.rs
    use crate::math::{F64Ext, LN_2PI};
    use crate::models::gaussian::{gaussian_log_density, GaussianParams};
    use alloc::vec;

    #[test]
    fn zero_loading_matches_isotropic_gaussian() {
        let w = Matrix::zeros(3, 2);
        let b = vec![1.0, -2.0, 0.5];
        let sigma2 = 0.8;
        let x = vec![1.2, -1.7, 0.0];
        let direct = linear_gaussian_log_marginal(&w, &b, sigma2, &x).unwrap();
        let gauss = GaussianParams::isotropic(b, sigma2);
        let expected = gaussian_log_density(&gauss, &x).unwrap();
        assert!((direct - expected).abs() < 1e-12);
    }

    #[test]
    fn scalar_case() {
        // W = 1, b = 0, sigma2 = 1: marginal variance 2.
        let w = Matrix::from_data(1, 1, vec![1.0]).unwrap();
        let got = linear_gaussian_log_marginal(&w, &[0.0], 1.0, &[0.0]).unwrap();
        assert!((got - (-0.5 * (LN_2PI + 2.0f64.ln()))).abs() < 1e-12);
    }

    #[test]
    fn matches_quadrature_over_latent() {
        // 2-D observation, 1-D latent: integrate
        // N(z; 0, 1) * N(x; W z + b, sigma2 I) over a z grid.
        let w = Matrix::from_data(2, 1, vec![0.8, -0.4]).unwrap();
        let b = vec![0.3, 0.1];
        let sigma2 = 0.5;
        let x = vec![1.0, -0.2];
        let closed = linear_gaussian_log_marginal(&w, &b, sigma2, &x).unwrap();

        let steps = 20_000;
        let (lo, hi) = (-10.0, 10.0);
        let dz = (hi - lo) / steps as f64;
        let mut acc = 0.0;
        for s in 0..=steps {
            let z = lo + s as f64 * dz;
            let prior = (-0.5 * (LN_2PI + z * z)).exp();
            let mu = [w.get(0, 0) * z + b[0], w.get(1, 0) * z + b[1]];
            let sq = (x[0] - mu[0]) * (x[0] - mu[0]) + (x[1] - mu[1]) * (x[1] - mu[1]);
            let lik = (-(LN_2PI + sigma2.ln()) - sq / (2.0 * sigma2)).exp();
            let weight = if s == 0 || s == steps { 0.5 } else { 1.0 };
            acc += weight * prior * lik;
        }
        let quad = (acc * dz).ln();
        assert!((closed - quad).abs() < 1e-3, "closed={closed} quad={quad}");
    }

    #[test]
    fn shape_checks() {
        let w = Matrix::zeros(2, 1);
        assert!(linear_gaussian_log_marginal(&w, &[0.0], 1.0, &[0.0, 0.0]).is_err());
        assert!(linear_gaussian_log_marginal(&w, &[0.0, 0.0], 0.0, &[0.0, 0.0]).is_err());
    }
}
