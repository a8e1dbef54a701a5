//! Run configuration: one structured document drives a whole audit, so a
//! report can be traced back to the exact settings (and their hash) that
//! produced it. Individual keys can be overridden by CLI flags.

use std::path::{Path, PathBuf};

use memaudit_core::models::estimator::EstimatorSpec;
use memaudit_core::Dataset;
use serde::{Deserialize, Serialize};

use crate::io::synth::{generate_synth, SynthAnnotations, SynthSpec};
use crate::io::{IoError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DataSource {
    Csv { path: PathBuf, has_header: bool },
    Idx { path: PathBuf },
    Synth(SynthSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MitigationStrategy {
    /// Wrap every fit with a broad outlier component and re-score.
    Outlier { weight: f64, variance_scale: f64 },
    /// Audit the (DP-histogram) estimator against its epsilon bound via
    /// exact LOO scores.
    Dp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: DataSource,
    pub estimator: EstimatorSpec,
    /// Fold repetitions.
    #[serde(default = "default_l")]
    pub l: usize,
    /// Folds per repetition.
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Snapshot epochs for `trace`.
    #[serde(default)]
    pub checkpoints: Vec<usize>,
    /// `T` for the exact LOO path.
    #[serde(default = "default_one")]
    pub loo_repetitions: usize,
    /// Must be set when a LOO run would exceed 10^4 fits.
    #[serde(default)]
    pub acknowledge_fit_budget: bool,
    /// Restrict LOO scoring to these ids (fits still sweep all rows).
    #[serde(default)]
    pub loo_targets: Option<Vec<usize>>,
    /// Held-out data for the nearest-neighbor diagnostic.
    #[serde(default)]
    pub validation: Option<DataSource>,
    /// Test hook: reuse the validation rows as the sample set (forces
    /// every ratio to 1).
    #[serde(default)]
    pub samples_from_validation: bool,
    /// Memorization-score bin width for histogram and ratio exports.
    #[serde(default = "default_bin_width")]
    pub bin_width: f64,
    /// The "highly memorized" fraction.
    #[serde(default = "default_top_fraction")]
    pub top_fraction: f64,
    /// Aggregate partial tables instead of refusing them.
    #[serde(default)]
    pub force_partial: bool,
    #[serde(default)]
    pub mitigation: Option<MitigationStrategy>,
}

fn default_l() -> usize {
    10
}
fn default_k() -> usize {
    10
}
fn default_workers() -> usize {
    1
}
fn default_one() -> usize {
    1
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_bin_width() -> f64 {
    50.0
}
fn default_top_fraction() -> f64 {
    0.05
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let config: RunConfig =
            ron::from_str(&text).map_err(|e| IoError::Format(format!("config parse: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.l < 1 {
            return Err(IoError::Format("config needs l >= 1".into()));
        }
        if self.k < 2 {
            return Err(IoError::Format("config needs k >= 2".into()));
        }
        if self.loo_repetitions < 1 {
            return Err(IoError::Format("config needs loo_repetitions >= 1".into()));
        }
        if !(self.top_fraction > 0.0 && self.top_fraction <= 1.0) {
            return Err(IoError::Format(
                "config needs 0 < top_fraction <= 1".into(),
            ));
        }
        if !(self.bin_width > 0.0) {
            return Err(IoError::Format("config needs bin_width > 0".into()));
        }
        Ok(())
    }

    /// Stable content hash stamped into reports. Worker count and output
    /// directory are execution details with no bearing on the results, so
    /// they are normalized out: reruns with different parallelism produce
    /// byte-identical reports.
    pub fn hash(&self) -> Result<u64> {
        let mut canonical_config = self.clone();
        canonical_config.workers = 1;
        canonical_config.out_dir = default_out_dir();
        let canonical = ron::to_string(&canonical_config)
            .map_err(|e| IoError::Format(format!("config serialization: {e}")))?;
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        for byte in canonical.bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        Ok(h)
    }

    pub fn load_source(source: &DataSource) -> Result<(Dataset, Option<SynthAnnotations>)> {
        match source {
            DataSource::Csv { path, has_header } => {
                Ok((crate::io::csv::load_csv(path, *has_header)?, None))
            }
            DataSource::Idx { path } => Ok((crate::io::idx::load_idx(path)?, None)),
            DataSource::Synth(spec) => {
                let data = generate_synth(spec)?;
                Ok((data.dataset, Some(data.annotations)))
            }
        }
    }

    pub fn load_dataset(&self) -> Result<(Dataset, Option<SynthAnnotations>)> {
        Self::load_source(&self.dataset)
    }
}
