//! Image preprocessing: dynamic binarization, uniform dequantization with
//! a logit transform (and its density correction), and the log-probability
//! histogram used to compare memorized against regular observations.

use memaudit_core::math::{logit, sigmoid};
use memaudit_core::rng::{uniform, ChaCha8Rng};
use serde::{Deserialize, Serialize};

use super::{IoError, Result};

/// Draw each pixel as an independent coin with success probability equal
/// to the gray value.
pub fn binarize_dynamic(row: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(IoError::Format(
            "binarization needs pixel values in [0, 1]".into(),
        ));
    }
    Ok(row
        .iter()
        .map(|&p| if uniform(rng) < p { 1.0 } else { 0.0 })
        .collect())
}

/// Uniform dequantization followed by a logit transform:
/// `y = logit(alpha + (1 - 2 alpha) (255 x + u) / 256)` with
/// `u ~ Uniform[0, 1)` per pixel. Returns the transformed observation and
/// the summed log-derivative, so a density fitted in y-space converts back
/// with `log p_x = log p_y + log_det`.
pub fn dequantize_logit(
    row: &[f64],
    alpha: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, f64)> {
    if !(0.0 < alpha && alpha < 0.5) {
        return Err(IoError::Format(format!(
            "logit squeeze alpha must lie in (0, 0.5), got {alpha}"
        )));
    }
    let mut out = Vec::with_capacity(row.len());
    let mut log_det = 0.0;
    let slope = (1.0 - 2.0 * alpha) * 255.0 / 256.0;
    for &x in row {
        let u = uniform(rng);
        let s = alpha + (1.0 - 2.0 * alpha) * (255.0 * x + u) / 256.0;
        out.push(logit(s));
        // dy/dx = slope / (s (1 - s))
        log_det += slope.ln() - s.ln() - (1.0 - s).ln();
    }
    Ok((out, log_det))
}

/// Inverse of [`dequantize_logit`] given the same per-pixel noise.
pub fn dequantize_logit_inverse(y: &[f64], alpha: f64, noise: &[f64]) -> Vec<f64> {
    y.iter()
        .zip(noise)
        .map(|(&y, &u)| {
            let s = sigmoid(y);
            ((s - alpha) / (1.0 - 2.0 * alpha) * 256.0 - u) / 255.0
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogProbBin {
    pub lo: f64,
    pub hi: f64,
    pub memorized: usize,
    pub regular: usize,
    /// `memorized / (memorized + regular)` within the bin.
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogProbHistogram {
    pub bin_width: f64,
    pub bins: Vec<LogProbBin>,
}

/// Histogram of log-probabilities split into memorized and regular
/// observations. `log_probs` is aligned with `ids`; `memorized` lists the
/// ids in the highly-memorized partition.
pub fn hist_bins(
    log_probs: &[f64],
    ids: &[usize],
    memorized: &[usize],
    bin_width: f64,
) -> Result<LogProbHistogram> {
    if log_probs.is_empty() || log_probs.len() != ids.len() {
        return Err(IoError::Format(
            "histogram needs aligned, non-empty log-probabilities and ids".into(),
        ));
    }
    if !(bin_width > 0.0) || !bin_width.is_finite() {
        return Err(IoError::Format("bin width must be positive".into()));
    }
    let min = log_probs.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = log_probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !min.is_finite() || !max.is_finite() {
        return Err(IoError::Format(
            "histogram needs finite log-probabilities".into(),
        ));
    }
    let origin = (min / bin_width).floor() * bin_width;
    let count = (((max - origin) / bin_width).floor() as usize + 1).max(1);
    let mut mem = vec![0usize; count];
    let mut reg = vec![0usize; count];
    for (&lp, id) in log_probs.iter().zip(ids) {
        let b = (((lp - origin) / bin_width).floor() as usize).min(count - 1);
        if memorized.contains(id) {
            mem[b] += 1;
        } else {
            reg[b] += 1;
        }
    }
    let bins = (0..count)
        .filter(|&b| mem[b] + reg[b] > 0)
        .map(|b| LogProbBin {
            lo: origin + b as f64 * bin_width,
            hi: origin + (b + 1) as f64 * bin_width,
            memorized: mem[b],
            regular: reg[b],
            proportion: mem[b] as f64 / (mem[b] + reg[b]) as f64,
        })
        .collect();
    Ok(LogProbHistogram { bin_width, bins })
}
