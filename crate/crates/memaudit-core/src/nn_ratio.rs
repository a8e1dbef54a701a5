//! Nearest-neighbor distance ratios: for each training observation, the
//! distance to its closest validation point divided by the distance to its
//! closest model sample. Ratios above 1 mean the model has placed a sample
//! closer to the training point than any fresh data point gets, which
//! suggests memorization. Image data is compared after 2x2 average-pooling.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, ShapeTag};
use crate::error::{CoreError, Result};
#[allow(unused_imports)] // false positive: unstable inherent f64 methods shadow the lint
use crate::math::F64Ext;
use crate::memscore::{top_fraction, MemorizationResult};
use crate::numerics::{mean, pearson, sample_std};

/// 2x2 average pooling of one observation. Image rows are laid out
/// channel-major (each channel a contiguous `height * width` plane); both
/// spatial dimensions must be even. Tabular observations pass through
/// unchanged.
pub fn downsample_avg2(row: &[f64], shape: ShapeTag) -> Result<(Vec<f64>, ShapeTag)> {
    let ShapeTag::Image {
        height,
        width,
        channels,
    } = shape
    else {
        return Ok((row.to_vec(), shape));
    };
    if height % 2 != 0 || width % 2 != 0 {
        return Err(CoreError::InvalidArgument(alloc::format!(
            "downsampling needs even spatial dimensions, got {height}x{width}"
        )));
    }
    if row.len() != height * width * channels {
        return Err(CoreError::DimensionMismatch {
            expected: height * width * channels,
            got: row.len(),
        });
    }
    let (oh, ow) = (height / 2, width / 2);
    let mut out = Vec::with_capacity(oh * ow * channels);
    for c in 0..channels {
        let plane = &row[c * height * width..(c + 1) * height * width];
        for y in 0..oh {
            for x in 0..ow {
                let sum = plane[2 * y * width + 2 * x]
                    + plane[2 * y * width + 2 * x + 1]
                    + plane[(2 * y + 1) * width + 2 * x]
                    + plane[(2 * y + 1) * width + 2 * x + 1];
                out.push(sum / 4.0);
            }
        }
    }
    Ok((
        out,
        ShapeTag::Image {
            height: oh,
            width: ow,
            channels,
        },
    ))
}

/// Downsample every row of a dataset. Returns the (possibly unchanged)
/// dataset and whether pooling was actually applied, so callers can notify
/// when tabular data passed through.
pub fn downsample_dataset(data: &Dataset) -> Result<(Dataset, bool)> {
    if matches!(data.shape(), ShapeTag::Flat) {
        return Ok((data.clone(), false));
    }
    let mut rows = Vec::new();
    let mut out_shape = data.shape();
    for row in data.rows() {
        let (pooled, shape) = downsample_avg2(row, data.shape())?;
        rows.extend_from_slice(&pooled);
        out_shape = shape;
    }
    let dim = out_shape.dim().expect("image shape has a dimension");
    Ok((Dataset::from_rows(data.name(), rows, dim, out_shape)?, true))
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn min_distance(x: &[f64], set: &Dataset) -> f64 {
    set.rows()
        .map(|row| euclidean(x, row))
        .fold(f64::INFINITY, f64::min)
}

/// Per-training-observation ratio of closest-validation distance to
/// closest-sample distance, on downsampled representations. A zero
/// denominator (the point reappears verbatim among the samples) yields the
/// `+inf` sentinel.
pub fn distance_ratio(
    train: &Dataset,
    validation: &Dataset,
    samples: &Dataset,
) -> Result<Vec<f64>> {
    if samples.n() != validation.n() {
        return Err(CoreError::InvalidArgument(alloc::format!(
            "sample set ({}) and validation set ({}) must be the same size",
            samples.n(),
            validation.n()
        )));
    }
    let (train, _) = downsample_dataset(train)?;
    let (validation, _) = downsample_dataset(validation)?;
    let (samples, _) = downsample_dataset(samples)?;
    if validation.dim() != train.dim() || samples.dim() != train.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: train.dim(),
            got: if validation.dim() != train.dim() {
                validation.dim()
            } else {
                samples.dim()
            },
        });
    }
    Ok(train
        .rows()
        .map(|x| {
            let num = min_distance(x, &validation);
            let den = min_distance(x, &samples);
            if den == 0.0 {
                f64::INFINITY
            } else {
                num / den
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioBin {
    /// Memorization-score interval `[lo, hi)`.
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean_rho: f64,
    /// Standard error of the mean; absent for singleton bins.
    pub standard_error: Option<f64>,
}

/// The ratio diagnostic compared against memorization scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub ids: Vec<usize>,
    pub rho: Vec<f64>,
    /// Ids whose ratio is not a positive finite number (duplicates in the
    /// sample or validation set); excluded from bins and correlation.
    pub flagged: Vec<usize>,
    /// Ids with finite rho > 1, the "suggests memorization" region.
    pub above_one: Vec<usize>,
    pub bins: Vec<RatioBin>,
    /// Ratio distribution over the top-scoring fraction ...
    pub top_rho: Vec<f64>,
    /// ... and over everything else.
    pub regular_rho: Vec<f64>,
    pub pearson_r: f64,
    pub bin_width: f64,
    pub fraction: f64,
}

/// Bin the ratios by memorization score and correlate the two diagnostics.
/// `rho` is indexed by observation id (position in the audited training
/// set); alignment with `scores` goes through `scores.ids`.
pub fn ratio_report(
    rho: &[f64],
    scores: &MemorizationResult,
    bin_width: f64,
    fraction: f64,
) -> Result<RatioReport> {
    if !(bin_width > 0.0) || !bin_width.is_finite() {
        return Err(CoreError::InvalidArgument(
            "bin width must be positive and finite".into(),
        ));
    }
    let mut ids = Vec::with_capacity(scores.ids.len());
    let mut aligned = Vec::with_capacity(scores.ids.len());
    for &id in &scores.ids {
        let Some(&r) = rho.get(id) else {
            return Err(CoreError::InvalidSubset(alloc::format!(
                "score id {id} has no ratio entry"
            )));
        };
        ids.push(id);
        aligned.push(r);
    }
    let mut flagged = Vec::new();
    let mut finite_rho = Vec::new();
    let mut finite_m = Vec::new();
    let mut finite_ids = Vec::new();
    for (pos, (&id, &r)) in ids.iter().zip(&aligned).enumerate() {
        if r.is_finite() && r > 0.0 {
            finite_rho.push(r);
            finite_m.push(scores.m[pos]);
            finite_ids.push(id);
        } else {
            flagged.push(id);
        }
    }
    if finite_rho.is_empty() {
        return Err(CoreError::EmptyInput("no finite distance ratios"));
    }
    let above_one: Vec<usize> = finite_ids
        .iter()
        .zip(&finite_rho)
        .filter(|(_, &r)| r > 1.0)
        .map(|(&id, _)| id)
        .collect();

    // Bin the scores on a grid anchored at a multiple of the width.
    let min_m = finite_m.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_m = finite_m.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let origin = (min_m / bin_width).floor() * bin_width;
    let bin_count = (((max_m - origin) / bin_width).floor() as usize + 1).max(1);
    let mut members: Vec<Vec<f64>> = (0..bin_count).map(|_| Vec::new()).collect();
    for (&m, &r) in finite_m.iter().zip(&finite_rho) {
        let idx = (((m - origin) / bin_width).floor() as usize).min(bin_count - 1);
        members[idx].push(r);
    }
    let bins: Vec<RatioBin> = members
        .iter()
        .enumerate()
        .filter(|(_, rs)| !rs.is_empty())
        .map(|(b, rs)| RatioBin {
            lo: origin + b as f64 * bin_width,
            hi: origin + (b + 1) as f64 * bin_width,
            count: rs.len(),
            mean_rho: mean(rs),
            standard_error: (rs.len() >= 2)
                .then(|| sample_std(rs) / (rs.len() as f64).sqrt()),
        })
        .collect();

    let top_ids = top_fraction(scores, fraction)?;
    let mut top_rho = Vec::new();
    let mut regular_rho = Vec::new();
    for (&id, &r) in finite_ids.iter().zip(&finite_rho) {
        if top_ids.contains(&id) {
            top_rho.push(r);
        } else {
            regular_rho.push(r);
        }
    }
    let pearson_r = pearson(&finite_rho, &finite_m)?;
    Ok(RatioReport {
        ids,
        rho: aligned,
        flagged,
        above_one,
        bins,
        top_rho,
        regular_rho,
        pearson_r,
        bin_width,
        fraction,
    })
}
