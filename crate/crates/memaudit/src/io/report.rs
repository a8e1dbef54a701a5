//! The report document: a versioned, human-diffable text file holding any
//! combination of audit artifacts plus provenance. Serialized as RON, which
//! keeps full-precision decimal floats (including `inf` sentinels) so a
//! write/read cycle is bit-exact.

use std::path::Path;

use memaudit_core::memscore::{LogProbTable, LooResult, MemorizationResult, QuantileTrace};
use memaudit_core::mitigate::DpVerdict;
use memaudit_core::nn_ratio::RatioReport;
use memaudit_core::FoldPlan;
use serde::{Deserialize, Serialize};

use super::synth::SynthAnnotations;
use super::transforms::LogProbHistogram;
use super::{IoError, Result};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub spec_hash: Option<u64>,
    pub config_hash: Option<u64>,
    pub seed: Option<u64>,
    /// Optional wall-clock stamp. The CLI leaves it unset so reruns of the
    /// same config produce byte-identical reports.
    pub created: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub version: u32,
    pub title: String,
    pub provenance: Provenance,
    pub plan: Option<FoldPlan>,
    pub table: Option<LogProbTable>,
    pub scores: Option<MemorizationResult>,
    /// Re-scored run for before/after comparisons (mitigation).
    pub scores_after: Option<MemorizationResult>,
    pub loo: Option<LooResult>,
    pub ratio: Option<RatioReport>,
    pub trace: Option<QuantileTrace>,
    pub dp_verdict: Option<DpVerdict>,
    pub histogram: Option<LogProbHistogram>,
    pub annotations: Option<SynthAnnotations>,
    /// Free-form notes (warnings, caveats, applied mitigations).
    pub notes: Vec<String>,
}

impl ReportFile {
    pub fn new(title: &str) -> ReportFile {
        ReportFile {
            version: REPORT_VERSION,
            title: title.into(),
            provenance: Provenance::default(),
            plan: None,
            table: None,
            scores: None,
            scores_after: None,
            loo: None,
            ratio: None,
            trace: None,
            dp_verdict: None,
            histogram: None,
            annotations: None,
            notes: Vec::new(),
        }
    }
}

pub fn report_to_string(report: &ReportFile) -> Result<String> {
    ron::ser::to_string_pretty(report, ron::ser::PrettyConfig::new())
        .map_err(|e| IoError::Format(format!("report serialization: {e}")))
}

pub fn write_report(report: &ReportFile, path: &Path) -> Result<()> {
    std::fs::write(path, report_to_string(report)?)?;
    Ok(())
}

pub fn read_report(path: &Path) -> Result<ReportFile> {
    let text = std::fs::read_to_string(path)?;
    let report: ReportFile = ron::from_str(&text)
        .map_err(|e| IoError::Format(format!("report parse: {e}")))?;
    if report.version != REPORT_VERSION {
        return Err(IoError::Format(format!(
            "unsupported report version {} (this build reads version {REPORT_VERSION})",
            report.version
        )));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use memaudit_core::memscore::ScoreSummary;

    fn sample_scores() -> MemorizationResult {
        MemorizationResult {
            ids: vec![0, 1, 2],
            u: vec![-97.0, 0.1, 1.0 / 3.0],
            v: vec![-178.0, -2.5e-13, 0.7],
            m: vec![81.0, f64::INFINITY, 1.0 / 3.0 - 0.7],
            held_out_spread: vec![0.0, 1e-300, 2.0],
            excluded: vec![],
            summary: ScoreSummary {
                mean: 0.123456789012345678,
                median: 81.0,
                skewness: -0.7,
                percentiles: vec![(0.95, 81.0)],
            },
            k: 10,
            l: 10,
            seed: 42,
            spec_hash: 0xdead_beef_dead_beef,
        }
    }

    #[test]
    fn bit_exact_round_trip() {
        let mut report = ReportFile::new("round trip");
        report.scores = Some(sample_scores());
        report.provenance.seed = Some(42);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.report");
        write_report(&report, &path).unwrap();
        let back = read_report(&path).unwrap();
        assert_eq!(report, back);
        let a = report.scores.unwrap();
        let b = back.scores.unwrap();
        for (x, y) in a.m.iter().zip(&b.m) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn unknown_version_rejected() {
        let mut report = ReportFile::new("v");
        report.version = 99;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.report");
        write_report(&report, &path).unwrap();
        let err = read_report(&path).unwrap_err().to_string();
        assert!(err.contains("version 99"), "{err}");
    }

    #[test]
    fn empty_file_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.report");
        std::fs::write(&path, "").unwrap();
        let err = read_report(&path).unwrap_err().to_string();
        assert!(err.contains("parse"), "{err}");
    }
}
