//! Multivariate normal fit by maximum likelihood, with diagonal or full
//! covariance.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{CoreError, Result};
#[allow(unused_imports)] // false positive: unstable inherent f64 methods shadow the lint
use crate::math::{F64Ext, LN_2PI};
use crate::models::linalg::{cholesky, mvn_log_density_chol, Matrix};
use crate::models::VARIANCE_FLOOR;
use crate::rng::{standard_normal, ChaCha8Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CovMode {
    Diagonal,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Covariance {
    Diagonal(Vec<f64>),
    /// Full covariance stored with its Cholesky factor for evaluation.
    Full {
        matrix: Matrix,
        chol: Matrix,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub mean: Vec<f64>,
    pub cov: Covariance,
    /// Set when a variance had to be floored (duplicate rows, n = 1, ...).
    pub degenerate: bool,
}

impl GaussianParams {
    pub fn isotropic(mean: Vec<f64>, variance: f64) -> GaussianParams {
        let d = mean.len();
        GaussianParams {
            mean,
            cov: Covariance::Diagonal(alloc::vec![variance.max(VARIANCE_FLOOR); d]),
            degenerate: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Maximum-likelihood mean and covariance (population normalization), with
/// the variance floor applied. Degenerate inputs are fitted anyway and
/// flagged rather than rejected.
pub fn fit_gaussian_mle(data: &Dataset, mode: CovMode) -> Result<GaussianParams> {
    let n = data.n();
    let d = data.dim();
    if mode == CovMode::Full && n <= d {
        return Err(CoreError::FitFailed(alloc::format!(
            "full covariance needs n > D (n={n}, D={d})"
        )));
    }
    let mean = data.column_means();
    let mut degenerate = n < 2;
    match mode {
        CovMode::Diagonal => {
            let mut vars = data.column_variances();
            for v in vars.iter_mut() {
                if *v < VARIANCE_FLOOR {
                    *v = VARIANCE_FLOOR;
                    degenerate = true;
                }
            }
            Ok(GaussianParams {
                mean,
                cov: Covariance::Diagonal(vars),
                degenerate,
            })
        }
        CovMode::Full => {
            let mut cov = Matrix::zeros(d, d);
            for row in data.rows() {
                for i in 0..d {
                    for j in 0..=i {
                        let v = cov.get(i, j) + (row[i] - mean[i]) * (row[j] - mean[j]);
                        cov.set(i, j, v);
                        cov.set(j, i, v);
                    }
                }
            }
            for v in cov.data.iter_mut() {
                *v /= n as f64;
            }
            for i in 0..d {
                if cov.get(i, i) < VARIANCE_FLOOR {
                    cov.set(i, i, VARIANCE_FLOOR);
                    degenerate = true;
                }
            }
            let chol = match cholesky(&cov) {
                Ok(l) => l,
                Err(_) => {
                    // Singular sample covariance: regularize the diagonal.
                    degenerate = true;
                    for i in 0..d {
                        cov.set(i, i, cov.get(i, i) + VARIANCE_FLOOR);
                    }
                    cholesky(&cov).map_err(|_| {
                        CoreError::FitFailed("covariance not positive definite".into())
                    })?
                }
            };
            Ok(GaussianParams {
                mean,
                cov: Covariance::Full { matrix: cov, chol },
                degenerate,
            })
        }
    }
}

pub fn gaussian_log_density(params: &GaussianParams, x: &[f64]) -> Result<f64> {
    let d = params.dim();
    if x.len() != d {
        return Err(CoreError::DimensionMismatch {
            expected: d,
            got: x.len(),
        });
    }
    match &params.cov {
        Covariance::Diagonal(vars) => {
            let mut acc = -0.5 * d as f64 * LN_2PI;
            for ((x, m), v) in x.iter().zip(&params.mean).zip(vars) {
                acc -= 0.5 * (v.ln() + (x - m) * (x - m) / v);
            }
            Ok(acc)
        }
        Covariance::Full { chol, .. } => {
            let centered: Vec<f64> = x.iter().zip(&params.mean).map(|(x, m)| x - m).collect();
            Ok(mvn_log_density_chol(chol, &centered))
        }
    }
}

pub fn gaussian_sample(params: &GaussianParams, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = params.dim();
    let noise: Vec<f64> = (0..d).map(|_| standard_normal(rng)).collect();
    match &params.cov {
        Covariance::Diagonal(vars) => params
            .mean
            .iter()
            .zip(vars)
            .zip(&noise)
            .map(|((m, v), e)| m + v.sqrt() * e)
            .collect(),
        Covariance::Full { chol, .. } => {
            let mut x = params.mean.clone();
            for i in 0..d {
                for k in 0..=i {
                    x[i] += chol.get(i, k) * noise[k];
                }
            }
            x
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ShapeTag;
    use crate::rng::SeedableRng;
    use alloc::vec;

    fn dataset(rows: Vec<f64>, dim: usize) -> Dataset {
        Dataset::from_rows("t", rows, dim, ShapeTag::Flat).unwrap()
    }

    #[test]
    fn one_dim_closed_form() {
        let d = dataset(vec![0.0, 1.0, 2.0], 1);
        let p = fit_gaussian_mle(&d, CovMode::Diagonal).unwrap();
        assert!((p.mean[0] - 1.0).abs() < 1e-14);
        match &p.cov {
            Covariance::Diagonal(v) => assert!((v[0] - 2.0 / 3.0).abs() < 1e-14),
            _ => unreachable!(),
        }
        assert!(!p.degenerate);
    }

    #[test]
    fn identical_rows_floored_and_flagged() {
        let d = dataset(vec![1.5, 1.5, 1.5], 1);
        let p = fit_gaussian_mle(&d, CovMode::Diagonal).unwrap();
        assert_eq!(p.mean, vec![1.5]);
        match &p.cov {
            Covariance::Diagonal(v) => assert_eq!(v[0], VARIANCE_FLOOR),
            _ => unreachable!(),
        }
        assert!(p.degenerate);
    }

    #[test]
    fn monte_carlo_standard_normal_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let mut rows = Vec::with_capacity(2 * n);
        for _ in 0..n {
            rows.push(standard_normal(&mut rng));
            rows.push(standard_normal(&mut rng));
        }
        let d = dataset(rows, 2);
        let p = fit_gaussian_mle(&d, CovMode::Diagonal).unwrap();
        assert!(p.mean.iter().all(|m| m.abs() < 0.05));
        match &p.cov {
            Covariance::Diagonal(v) => assert!(v.iter().all(|v| (v - 1.0).abs() < 0.1)),
            _ => unreachable!(),
        }
    }

    #[test]
    fn standard_normal_log_density() {
        let p = GaussianParams::isotropic(vec![0.0], 1.0);
        let got = gaussian_log_density(&p, &[0.0]).unwrap();
        assert!((got - (-0.5 * LN_2PI)).abs() < 1e-14);
    }

    #[test]
    fn density_at_mean_independent_of_location() {
        let a = GaussianParams::isotropic(vec![0.0, 0.0], 2.0);
        let b = GaussianParams::isotropic(vec![100.0, -40.0], 2.0);
        let at_a = gaussian_log_density(&a, &[0.0, 0.0]).unwrap();
        let at_b = gaussian_log_density(&b, &[100.0, -40.0]).unwrap();
        assert!((at_a - at_b).abs() < 1e-12);
    }

    #[test]
    fn multi_dim_standard_normal_at_origin() {
        for d in [1usize, 3, 7] {
            let p = GaussianParams::isotropic(vec![0.0; d], 1.0);
            let got = gaussian_log_density(&p, &vec![0.0; d]).unwrap();
            assert!((got - (-(d as f64) / 2.0 * LN_2PI)).abs() < 1e-12);
        }
    }

    #[test]
    fn full_matches_diagonal_on_uncorrelated_cov() {
        let d = dataset(vec![0.0, 0.0, 1.0, 2.0, 2.0, 0.0, 3.0, 2.0, 1.5, 1.0], 2);
        let full = fit_gaussian_mle(&d, CovMode::Full).unwrap();
        let x = [0.7, 1.3];
        // Evaluate against an explicit quadratic form on the fitted matrix.
        if let Covariance::Full { matrix, .. } = &full.cov {
            let det = matrix.get(0, 0) * matrix.get(1, 1) - matrix.get(0, 1) * matrix.get(1, 0);
            let inv = [
                matrix.get(1, 1) / det,
                -matrix.get(0, 1) / det,
                -matrix.get(1, 0) / det,
                matrix.get(0, 0) / det,
            ];
            let c = [x[0] - full.mean[0], x[1] - full.mean[1]];
            let quad = c[0] * (inv[0] * c[0] + inv[1] * c[1]) + c[1] * (inv[2] * c[0] + inv[3] * c[1]);
            let expected = -0.5 * (2.0 * LN_2PI + det.ln() + quad);
            let got = gaussian_log_density(&full, &x).unwrap();
            assert!((got - expected).abs() < 1e-10);
        } else {
            unreachable!();
        }
    }

    #[test]
    fn full_mode_needs_enough_rows() {
        let d = dataset(vec![0.0, 0.0, 1.0, 1.0], 2);
        assert!(fit_gaussian_mle(&d, CovMode::Full).is_err());
    }

    #[test]
    fn dimension_mismatch() {
        let p = GaussianParams::isotropic(vec![0.0, 0.0], 1.0);
        assert!(gaussian_log_density(&p, &[0.0]).is_err());
    }
}
