//! Mitigation strategies: a broad low-weight outlier component wrapped
//! around a fitted density, and epsilon-DP histogram estimation with an
//! empirical bound check on the leave-one-out memorization score.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{CoreError, Result};
#[allow(unused_imports)] // false positive: unstable inherent f64 methods shadow the lint
use crate::math::F64Ext;
use crate::models::gaussian::{gaussian_log_density, GaussianParams};
use crate::numerics::log_sum_exp;
use crate::rng::{laplace, uniform, ChaCha8Rng, SeedableRng};

/// A broad Gaussian mixed into a base density with small weight `w`:
/// `log p'(x) = logsumexp(log(1 - w) + log p(x), log w + log q0(x))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierMixture {
    pub weight: f64,
    pub broad: GaussianParams,
}

impl OutlierMixture {
    /// Broad component centered at the training mean with
    /// `variance_scale` times the per-dimension data variance.
    /// Defaults elsewhere use `weight = 0.01`, `variance_scale = 100`.
    pub fn from_data(data: &Dataset, weight: f64, variance_scale: f64) -> Result<OutlierMixture> {
        check_weight(weight)?;
        if variance_scale < 1.0 {
            return Err(CoreError::InvalidArgument(
                "broad variance must be at least the data variance".into(),
            ));
        }
        let mean = data.column_means();
        let vars: Vec<f64> = data
            .column_variances()
            .iter()
            .map(|v| (v * variance_scale).max(crate::models::VARIANCE_FLOOR))
            .collect();
        Ok(OutlierMixture {
            weight,
            broad: GaussianParams {
                mean,
                cov: crate::models::gaussian::Covariance::Diagonal(vars),
                degenerate: false,
            },
        })
    }

    /// Wrap a base log-density value at `x`.
    pub fn wrap(&self, base_log_density: f64, x: &[f64]) -> Result<f64> {
        with_outlier_component(base_log_density, self.weight, &self.broad, x)
    }
}

/// `log[(1 - w) p(x) + w q0(x)]` in log space.
pub fn with_outlier_component(
    base_log_density: f64,
    weight: f64,
    broad: &GaussianParams,
    x: &[f64],
) -> Result<f64> {
    check_weight(weight)?;
    let broad_logp = gaussian_log_density(broad, x)?;
    log_sum_exp(&[
        (1.0 - weight).ln() + base_log_density,
        weight.ln() + broad_logp,
    ])
}

fn check_weight(weight: f64) -> Result<()> {
    if !(weight > 0.0 && weight < 1.0) {
        return Err(CoreError::InvalidArgument(format!(
            "outlier weight must be in (0, 1), got {weight}"
        )));
    }
    Ok(())
}

/// Histogram density released under epsilon-DP: per-bin counts plus
/// Laplace noise of scale `1/epsilon` (add/remove sensitivity 1), clamped
/// at zero and renormalized. Clamping and normalization are
/// post-processing, so the release stays epsilon-DP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpHistogram {
    /// Bin edges per dimension, each strictly increasing.
    pub edges: Vec<Vec<f64>>,
    /// Normalized noisy masses over the flattened bin grid.
    pub masses: Vec<f64>,
    pub epsilon: f64,
    pub seed: u64,
}

impl DpHistogram {
    pub fn dim(&self) -> usize {
        self.edges.len()
    }

    pub fn bin_count(&self) -> usize {
        self.edges.iter().map(|e| e.len() - 1).product()
    }

    fn locate(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dim() {
            return Err(CoreError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let mut index = 0;
        for (edges, &v) in self.edges.iter().zip(x) {
            let bins = edges.len() - 1;
            if v < edges[0] || v > edges[bins] {
                return Err(CoreError::InvalidArgument(format!(
                    "observation {v} outside histogram range [{}, {}]",
                    edges[0], edges[bins]
                )));
            }
            // Upper edge belongs to the last bin.
            let mut b = match edges.binary_search_by(|e| e.partial_cmp(&v).unwrap()) {
                Ok(pos) => pos,
                Err(pos) => pos - 1,
            };
            if b >= bins {
                b = bins - 1;
            }
            index = index * bins + b;
        }
        Ok(index)
    }

    fn bin_volume(&self, mut index: usize) -> f64 {
        let mut volume = 1.0;
        for edges in self.edges.iter().rev() {
            let bins = edges.len() - 1;
            let b = index % bins;
            volume *= edges[b + 1] - edges[b];
            index /= bins;
        }
        volume
    }

    /// Log of the released density at `x`; `-inf` where the noisy mass is
    /// zero.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        let bin = self.locate(x)?;
        let mass = self.masses[bin];
        if mass <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(mass.ln() - self.bin_volume(bin).ln())
    }

    /// Draw a bin by mass, then uniformly within it.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let u = uniform(rng);
        let mut acc = 0.0;
        let mut chosen = self.masses.len() - 1;
        for (b, m) in self.masses.iter().enumerate() {
            acc += m;
            if u < acc {
                chosen = b;
                break;
            }
        }
        let mut coords = alloc::vec![0.0; self.dim()];
        let mut index = chosen;
        for (d, edges) in self.edges.iter().enumerate().rev() {
            let bins = edges.len() - 1;
            let b = index % bins;
            index /= bins;
            coords[d] = edges[b] + (edges[b + 1] - edges[b]) * uniform(rng);
        }
        coords
    }
}

/// Fit the epsilon-DP histogram. Every observation must fall inside the
/// given edges; widen the range at the call site otherwise.
pub fn fit_dp_histogram(
    data: &Dataset,
    edges: &[Vec<f64>],
    epsilon: f64,
    seed: u64,
) -> Result<DpHistogram> {
    if epsilon <= 0.0 {
        return Err(CoreError::InvalidArgument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if edges.len() != data.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: data.dim(),
            got: edges.len(),
        });
    }
    for per_dim in edges {
        if per_dim.len() < 2 || per_dim.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CoreError::InvalidArgument(
                "bin edges must be strictly increasing with at least one bin".into(),
            ));
        }
    }
    let mut hist = DpHistogram {
        edges: edges.to_vec(),
        masses: Vec::new(),
        epsilon,
        seed,
    };
    let mut counts = alloc::vec![0.0f64; hist.bin_count()];
    for row in data.rows() {
        let bin = hist.locate(row)?;
        counts[bin] += 1.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / epsilon;
    for c in counts.iter_mut() {
        *c = (*c + laplace(&mut rng, scale)).max(0.0);
    }
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        // Every noisy count clamped away: release the uniform histogram.
        let b = counts.len() as f64;
        counts.iter_mut().for_each(|c| *c = 1.0 / b);
    } else {
        counts.iter_mut().for_each(|c| *c /= total);
    }
    hist.masses = counts;
    Ok(hist)
}

/// Result of checking the empirical DP bound `max_i M_i <= epsilon`.
///
/// The check runs at the sampled scores plus Monte-Carlo slack; the
/// converse does not hold: a max score at or below epsilon does not make
/// the algorithm epsilon-DP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpVerdict {
    pub epsilon: f64,
    pub max_score: f64,
    pub max_score_id: usize,
    /// Monte-Carlo standard error of the maximal score.
    pub standard_error: f64,
    pub pass: bool,
    pub caveat: String,
}

/// Verdict on `max_i M_i <= epsilon + 3 * SE`. Requires Monte-Carlo
/// standard errors, hence scores estimated with `T >= 2` repetitions.
pub fn dp_bound_check(
    scores: &[f64],
    standard_errors: &[f64],
    ids: &[usize],
    epsilon: f64,
) -> Result<DpVerdict> {
    if scores.is_empty() {
        return Err(CoreError::EmptyInput("dp_bound_check"));
    }
    if scores.len() != standard_errors.len() || scores.len() != ids.len() {
        return Err(CoreError::DimensionMismatch {
            expected: scores.len(),
            got: standard_errors.len(),
        });
    }
    if epsilon <= 0.0 {
        return Err(CoreError::InvalidArgument("epsilon must be positive".into()));
    }
    let mut max_pos = 0;
    for (pos, score) in scores.iter().enumerate() {
        if *score > scores[max_pos] {
            max_pos = pos;
        }
    }
    let max_score = scores[max_pos];
    let se = standard_errors[max_pos];
    Ok(DpVerdict {
        epsilon,
        max_score,
        max_score_id: ids[max_pos],
        standard_error: se,
        pass: max_score <= epsilon + 3.0 * se,
        caveat: String::from(
            "a maximal score at or below epsilon does not imply the algorithm is epsilon-DP",
        ),
    })
}
