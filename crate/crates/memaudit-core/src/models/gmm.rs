//! Diagonal-covariance Gaussian mixture fitted by expectation-maximization,
//! with responsibilities computed in log space.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{CoreError, Result};
#[allow(unused_imports)] // false positive: unstable inherent f64 methods shadow the lint
use crate::math::{F64Ext, LN_2PI};
use crate::numerics::log_sum_exp;
use crate::rng::{standard_normal, uniform_index, ChaCha8Rng, SeedableRng};
use crate::models::VARIANCE_FLOOR;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmParams {
    /// Mixture weights on the simplex.
    pub weights: Vec<f64>,
    /// `m x dim` component means, row-major.
    pub means: Vec<f64>,
    /// `m x dim` diagonal variances, row-major.
    pub variances: Vec<f64>,
    pub dim: usize,
    /// Number of EM iterations actually run.
    pub iterations: usize,
    /// Components that collapsed and were re-initialized during EM.
    pub reinit_events: usize,
    /// Log-likelihood trace, one entry per iteration.
    pub log_likelihood: Vec<f64>,
}

impl GmmParams {
    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn mean(&self, c: usize) -> &[f64] {
        &self.means[c * self.dim..(c + 1) * self.dim]
    }

    pub fn variance(&self, c: usize) -> &[f64] {
        &self.variances[c * self.dim..(c + 1) * self.dim]
    }

    fn component_log_density(&self, c: usize, x: &[f64]) -> f64 {
        let mut acc = -0.5 * self.dim as f64 * LN_2PI;
        for ((x, m), v) in x.iter().zip(self.mean(c)).zip(self.variance(c)) {
            acc -= 0.5 * (v.ln() + (x - m) * (x - m) / v);
        }
        acc
    }
}

pub fn gmm_log_density(params: &GmmParams, x: &[f64]) -> Result<f64> {
    if x.len() != params.dim {
        return Err(CoreError::DimensionMismatch {
            expected: params.dim,
            got: x.len(),
        });
    }
    let terms: Vec<f64> = (0..params.components())
        .map(|c| params.weights[c].ln() + params.component_log_density(c, x))
        .collect();
    log_sum_exp(&terms)
}

pub fn gmm_sample(params: &GmmParams, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let u = crate::rng::uniform(rng);
    let mut acc = 0.0;
    let mut chosen = params.components() - 1;
    for (c, w) in params.weights.iter().enumerate() {
        acc += w;
        if u < acc {
            chosen = c;
            break;
        }
    }
    params
        .mean(chosen)
        .iter()
        .zip(params.variance(chosen))
        .map(|(m, v)| m + v.sqrt() * standard_normal(rng))
        .collect()
}

/// EM until the log-likelihood improvement drops below `tol` or `max_iters`
/// is reached. Collapsed components are re-initialized at a random data
/// point and counted in `reinit_events`.
pub fn fit_gmm_em(
    data: &Dataset,
    m: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> Result<GmmParams> {
    let n = data.n();
    let d = data.dim();
    if m == 0 || m > n {
        return Err(CoreError::InvalidArgument(alloc::format!(
            "need 1 <= components <= n, got m={m}, n={n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let col_vars: Vec<f64> = data
        .column_variances()
        .iter()
        .map(|v| v.max(VARIANCE_FLOOR))
        .collect();

    let mut params = GmmParams {
        weights: alloc::vec![1.0 / m as f64; m],
        means: {
            let mut means = Vec::with_capacity(m * d);
            for _ in 0..m {
                means.extend_from_slice(data.row(uniform_index(&mut rng, n)));
            }
            means
        },
        variances: {
            let mut vars = Vec::with_capacity(m * d);
            for _ in 0..m {
                vars.extend_from_slice(&col_vars);
            }
            vars
        },
        dim: d,
        iterations: 0,
        reinit_events: 0,
        log_likelihood: Vec::new(),
    };

    let mut log_resp = alloc::vec![0.0; n * m];
    let mut prev_ll = f64::NEG_INFINITY;
    for iter in 0..max_iters {
        // E-step.
        let mut ll = 0.0;
        for (i, row) in data.rows().enumerate() {
            let terms: Vec<f64> = (0..m)
                .map(|c| params.weights[c].ln() + params.component_log_density(c, row))
                .collect();
            let norm = log_sum_exp(&terms)?;
            ll += norm;
            for c in 0..m {
                log_resp[i * m + c] = terms[c] - norm;
            }
        }
        params.iterations = iter + 1;
        params.log_likelihood.push(ll);

        // M-step.
        for c in 0..m {
            let nc: f64 = (0..n).map(|i| log_resp[i * m + c].exp()).sum();
            if nc < 1e-10 {
                // Collapsed component: restart it at a random data point.
                params.reinit_events += 1;
                let pick = uniform_index(&mut rng, n);
                params.means[c * d..(c + 1) * d].copy_from_slice(data.row(pick));
                params.variances[c * d..(c + 1) * d].copy_from_slice(&col_vars);
                params.weights[c] = 1.0 / n as f64;
                continue;
            }
            for j in 0..d {
                let mut mean = 0.0;
                for (i, row) in data.rows().enumerate() {
                    mean += log_resp[i * m + c].exp() * row[j];
                }
                mean /= nc;
                let mut var = 0.0;
                for (i, row) in data.rows().enumerate() {
                    var += log_resp[i * m + c].exp() * (row[j] - mean) * (row[j] - mean);
                }
                var /= nc;
                params.means[c * d + j] = mean;
                params.variances[c * d + j] = var.max(VARIANCE_FLOOR);
            }
            params.weights[c] = nc / n as f64;
        }
        // Renormalize in case a component was re-initialized.
        let wsum: f64 = params.weights.iter().sum();
        params.weights.iter_mut().for_each(|w| *w /= wsum);

        if (ll - prev_ll).abs() < tol {
            break;
        }
        prev_ll = ll;
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ShapeTag;
    use crate::models::gaussian::{fit_gaussian_mle, gaussian_log_density, CovMode};
    use alloc::vec;

    fn dataset(rows: Vec<f64>, dim: usize) -> Dataset {
        Dataset::from_rows("t", rows, dim, ShapeTag::Flat).unwrap()
    }

    #[test]
    fn single_component_reduces_to_gaussian_mle() {
        let d = dataset(vec![0.0, 1.0, 2.5, -0.5, 1.5, 0.25], 2);
        let gmm = fit_gmm_em(&d, 1, 0, 50, 1e-12).unwrap();
        let mle = fit_gaussian_mle(&d, CovMode::Diagonal).unwrap();
        for x in [[0.0, 0.0], [1.0, 1.0], [-2.0, 3.0]] {
            let a = gmm_log_density(&gmm, &x).unwrap();
            let b = gaussian_log_density(&mle, &x).unwrap();
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn two_well_separated_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut rows = Vec::new();
        for _ in 0..100 {
            rows.push(-10.0 + standard_normal(&mut rng));
        }
        for _ in 0..100 {
            rows.push(10.0 + standard_normal(&mut rng));
        }
        let d = dataset(rows, 1);
        let gmm = fit_gmm_em(&d, 2, 1, 200, 1e-9).unwrap();
        let mut means: Vec<f64> = (0..2).map(|c| gmm.mean(c)[0]).collect();
        means.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((means[0] + 10.0).abs() < 0.5, "means {means:?}");
        assert!((means[1] - 10.0).abs() < 0.5, "means {means:?}");
    }

    #[test]
    fn log_likelihood_non_decreasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rows: Vec<f64> = (0..120)
            .map(|i| if i % 2 == 0 { -2.0 } else { 2.0 } + 0.5 * standard_normal(&mut rng))
            .collect();
        let d = dataset(rows, 1);
        let gmm = fit_gmm_em(&d, 3, 4, 100, 0.0).unwrap();
        for w in gmm.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-8, "ll decreased: {w:?}");
        }
    }

    #[test]
    fn weights_on_simplex() {
        let d = dataset(vec![0.0, 1.0, 2.0, 3.0, 10.0, 11.0], 1);
        let gmm = fit_gmm_em(&d, 2, 7, 50, 1e-9).unwrap();
        let sum: f64 = gmm.weights.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(gmm.variances.iter().all(|v| *v >= VARIANCE_FLOOR));
    }

    #[test]
    fn invalid_component_count() {
        let d = dataset(vec![0.0, 1.0], 1);
        assert!(fit_gmm_em(&d, 0, 0, 10, 1e-9).is_err());
        assert!(fit_gmm_em(&d, 3, 0, 10, 1e-9).is_err());
    }
}
