//! The memorization estimators: the repeated K-fold pipeline, the exact
//! leave-one-out (LOO) reference, score aggregation, during-training
//! quantile traces, and the highly-memorized partition.
//!
//! The K-fold score fits one model per `(rep, fold)` coordinate on the data
//! minus that holdout set and records the log-density of every observation
//! under every fit. Each observation then has `L * (K - 1)` in-training
//! entries and `L` held-out entries; its score is the difference of the two
//! log-mean-exp averages. The LOO path is a deliberately independent
//! re-implementation of the same estimator at `K = n`, written as direct
//! loops over left-out rows, so the two routes cross-check each other.

use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{CoreError, Result};
use crate::fold::FoldPlan;
use crate::models::estimator::{fit_model, EstimatorSpec};
use crate::models::vae::vae_train_checkpoints;
use crate::numerics::{log_mean_exp, mean, quantile, sample_std, skewness};
use crate::seed::{derive_eval_seed, derive_fit_seed, mix_in};

/// Summary percentile levels reported alongside each score vector.
pub const SUMMARY_PERCENTILES: [f64; 6] = [0.05, 0.25, 0.5, 0.75, 0.95, 0.999];

/// Default quantile levels for during-training traces.
pub const TRACE_LEVELS: [f64; 2] = [0.95, 0.999];

/// Log-densities of every observation under every `(rep, fold)` fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogProbTable {
    /// `entries[rep][fold][i]`: log-density of observation `i` under the
    /// model fitted without holdout `(rep, fold)`. Failed fits hold NaN.
    pub entries: Vec<Vec<Vec<f64>>>,
    pub plan: FoldPlan,
    pub spec_hash: u64,
    /// `(rep, fold)` coordinates whose fit aborted.
    pub failed: Vec<(usize, usize)>,
}

impl LogProbTable {
    pub fn is_complete(&self) -> bool {
        self.failed.is_empty()
    }

    fn coord_failed(&self, rep: usize, fold: usize) -> bool {
        self.failed.contains(&(rep, fold))
    }
}

/// Per-observation scores plus the summary statistics over them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemorizationResult {
    pub ids: Vec<usize>,
    /// In-training log-mean-exp per observation.
    pub u: Vec<f64>,
    /// Held-out log-mean-exp per observation.
    pub v: Vec<f64>,
    /// `m[i] = u[i] - v[i]`.
    pub m: Vec<f64>,
    /// Sample standard deviation of the held-out entries, the estimator's
    /// per-observation noise floor (0 when fewer than two entries).
    pub held_out_spread: Vec<f64>,
    /// Ids dropped from a forced partial aggregation.
    pub excluded: Vec<usize>,
    pub summary: ScoreSummary,
    pub k: usize,
    pub l: usize,
    pub seed: u64,
    pub spec_hash: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub mean: f64,
    pub median: f64,
    pub skewness: f64,
    /// `(level, value)` pairs at [`SUMMARY_PERCENTILES`].
    pub percentiles: Vec<(f64, f64)>,
}

impl ScoreSummary {
    fn from_scores(scores: &[f64]) -> Result<ScoreSummary> {
        Ok(ScoreSummary {
            mean: mean(scores),
            median: quantile(scores, 0.5)?,
            skewness: skewness(scores),
            percentiles: SUMMARY_PERCENTILES
                .iter()
                .map(|&level| Ok((level, quantile(scores, level)?)))
                .collect::<Result<_>>()?,
        })
    }
}

impl MemorizationResult {
    pub fn score_of(&self, id: usize) -> Option<f64> {
        self.ids.iter().position(|&x| x == id).map(|p| self.m[p])
    }
}

/// Exact LOO scores with Monte-Carlo error bars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooResult {
    pub ids: Vec<usize>,
    pub scores: Vec<f64>,
    /// Delta-method standard error of each score over the `T` repetitions
    /// (0 when `T = 1`).
    pub standard_errors: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub repetitions: usize,
    pub spec_hash: u64,
}

/// Quantiles of the score vector at each training checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileTrace {
    pub epochs: Vec<usize>,
    pub levels: Vec<f64>,
    /// `values[checkpoint][level]`.
    pub values: Vec<Vec<f64>>,
    pub spec_hash: u64,
}

/// Fit the model for one `(rep, fold)` coordinate and score all `n`
/// observations under it. This is the unit of parallelism: calls for
/// distinct coordinates are independent, and the derived seeds make the
/// result a pure function of `(spec, data, plan, rep, fold)`.
pub fn fit_fold(
    spec: &EstimatorSpec,
    data: &Dataset,
    plan: &FoldPlan,
    rep: usize,
    fold: usize,
) -> Result<Vec<f64>> {
    if plan.n() != data.n() {
        return Err(CoreError::InvalidPlan(format!(
            "plan covers {} observations, dataset has {}",
            plan.n(),
            data.n()
        )));
    }
    let train = data.without(plan.holdout(rep, fold))?;
    let fit_seed = derive_fit_seed(plan.seed(), rep, fold);
    let model = fit_model(spec, &train, fit_seed)?;
    let mut row_logp = Vec::with_capacity(data.n());
    for pos in 0..data.n() {
        let logp = model.log_density_seeded(data.row(pos), derive_eval_seed(fit_seed, data.id(pos)))?;
        if logp.is_nan() {
            return Err(CoreError::FitFailed(format!(
                "NaN log-density for observation {} under fit ({rep}, {fold})",
                data.id(pos)
            )));
        }
        row_logp.push(logp);
    }
    Ok(row_logp)
}

/// Assemble a table from per-coordinate results, in any order. Every
/// coordinate of the plan must appear exactly once; failures become NaN
/// rows listed in `failed`.
pub fn assemble_table(
    plan: FoldPlan,
    spec_hash: u64,
    parts: Vec<(usize, usize, Result<Vec<f64>>)>,
) -> Result<LogProbTable> {
    let (n, k, l) = (plan.n(), plan.k(), plan.l());
    if parts.len() != l * k {
        return Err(CoreError::InvalidArgument(format!(
            "expected {} fold results, got {}",
            l * k,
            parts.len()
        )));
    }
    let mut entries = alloc::vec![alloc::vec![Vec::new(); k]; l];
    let mut seen = alloc::vec![false; l * k];
    let mut failed = Vec::new();
    for (rep, fold, outcome) in parts {
        if rep >= l || fold >= k {
            return Err(CoreError::InvalidArgument(format!(
                "coordinate ({rep}, {fold}) outside plan"
            )));
        }
        if core::mem::replace(&mut seen[rep * k + fold], true) {
            return Err(CoreError::InvalidArgument(format!(
                "duplicate fold result for ({rep}, {fold})"
            )));
        }
        entries[rep][fold] = match outcome {
            Ok(row_logp) => {
                if row_logp.len() != n {
                    return Err(CoreError::DimensionMismatch {
                        expected: n,
                        got: row_logp.len(),
                    });
                }
                row_logp
            }
            Err(_) => {
                failed.push((rep, fold));
                alloc::vec![f64::NAN; n]
            }
        };
    }
    failed.sort_unstable();
    Ok(LogProbTable {
        entries,
        plan,
        spec_hash,
        failed,
    })
}

/// Fit all `L * K` models and fill the table, sequentially, in coordinate
/// order. Fit aborts do not stop the sweep; they mark the table partial.
pub fn compute_logprob_table(
    spec: &EstimatorSpec,
    data: &Dataset,
    plan: &FoldPlan,
) -> Result<LogProbTable> {
    let parts: Vec<(usize, usize, Result<Vec<f64>>)> = plan
        .coords()
        .map(|(rep, fold)| (rep, fold, fit_fold(spec, data, plan, rep, fold)))
        .collect();
    assemble_table(plan.clone(), spec.hash(), parts)
}

/// Reduce a table to per-observation scores.
///
/// `U_i` averages (in density space) the entries from fits that trained on
/// observation `i`; `V_i` averages the entries from fits that held it out;
/// `M_i = U_i - V_i`. Partial tables are refused unless `force` is set, in
/// which case observations left without one of the two multisets are
/// excluded and listed.
pub fn aggregate_scores(table: &LogProbTable, force: bool) -> Result<MemorizationResult> {
    if !table.is_complete() && !force {
        return Err(CoreError::PartialTable {
            failed: table.failed.len(),
        });
    }
    let plan = &table.plan;
    let n = plan.n();
    let mut ids = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    let mut m = Vec::with_capacity(n);
    let mut held_out_spread = Vec::with_capacity(n);
    let mut excluded = Vec::new();
    let mut in_entries = Vec::new();
    let mut out_entries = Vec::new();
    for i in 0..n {
        in_entries.clear();
        out_entries.clear();
        for (rep, fold) in plan.coords() {
            if table.coord_failed(rep, fold) {
                continue;
            }
            let entry = table.entries[rep][fold][i];
            if plan.is_held_out(rep, fold, i) {
                out_entries.push(entry);
            } else {
                in_entries.push(entry);
            }
        }
        if in_entries.is_empty() || out_entries.is_empty() {
            excluded.push(i);
            continue;
        }
        let u_i = log_mean_exp(&in_entries)?;
        let v_i = log_mean_exp(&out_entries)?;
        ids.push(i);
        u.push(u_i);
        v.push(v_i);
        m.push(u_i - v_i);
        held_out_spread.push(sample_std(&out_entries));
    }
    if m.is_empty() {
        return Err(CoreError::EmptyInput("no observation survived aggregation"));
    }
    Ok(MemorizationResult {
        summary: ScoreSummary::from_scores(&m)?,
        ids,
        u,
        v,
        m,
        held_out_spread,
        excluded,
        k: plan.k(),
        l: plan.l(),
        seed: plan.seed(),
        spec_hash: table.spec_hash,
    })
}

/// Exact LOO memorization scores, estimated with `repetitions` independent
/// fits per left-out row (deterministic families need only one).
///
/// For each repetition every row `j` is left out once and a model is fitted
/// on the remainder; the score of a target `i` contrasts the density
/// average over fits that kept `i` against the average over fits that
/// dropped it. Densities are averaged across repetitions before taking
/// logs, and the standard error of each log-average comes from the
/// delta method on the per-repetition terms.
///
/// `targets` selects ids to score (`None` scores all); the full sweep of
/// `n * repetitions` fits happens either way, since every fit contributes
/// to every target's in-training average.
pub fn loo_memorization(
    spec: &EstimatorSpec,
    data: &Dataset,
    seed: u64,
    repetitions: usize,
    targets: Option<&[usize]>,
) -> Result<LooResult> {
    if repetitions == 0 {
        return Err(CoreError::InvalidArgument("need T >= 1 repetitions".into()));
    }
    let n = data.n();
    let positions: Vec<usize> = match targets {
        None => (0..n).collect(),
        Some(ids) => {
            if ids.is_empty() {
                return Err(CoreError::EmptyInput("LOO target set"));
            }
            ids.iter()
                .map(|&id| {
                    data.ids().iter().position(|&x| x == id).ok_or_else(|| {
                        CoreError::InvalidSubset(format!("unknown target id {id}"))
                    })
                })
                .collect::<Result<_>>()?
        }
    };
    let t_count = repetitions;
    // Per-repetition log-averages, used both for pooling and error bars.
    let mut u_rep = alloc::vec![alloc::vec![0.0f64; t_count]; positions.len()];
    let mut v_rep = alloc::vec![alloc::vec![0.0f64; t_count]; positions.len()];
    let mut u_terms = alloc::vec![Vec::with_capacity(n - 1); positions.len()];
    for t in 0..t_count {
        u_terms.iter_mut().for_each(Vec::clear);
        for j in 0..n {
            let train = data.without(&[j])?;
            let fit_seed = derive_fit_seed(seed, t, j);
            let model = fit_model(spec, &train, fit_seed)?;
            for (slot, &pos) in positions.iter().enumerate() {
                let logp = model
                    .log_density_seeded(data.row(pos), derive_eval_seed(fit_seed, data.id(pos)))?;
                if logp.is_nan() {
                    return Err(CoreError::FitFailed(format!(
                        "NaN log-density for observation {} under LOO fit ({t}, {j})",
                        data.id(pos)
                    )));
                }
                if pos == j {
                    v_rep[slot][t] = logp;
                } else {
                    u_terms[slot].push(logp);
                }
            }
        }
        for (slot, terms) in u_terms.iter().enumerate() {
            u_rep[slot][t] = log_mean_exp(terms)?;
        }
    }

    let mut ids = Vec::with_capacity(positions.len());
    let mut scores = Vec::with_capacity(positions.len());
    let mut standard_errors = Vec::with_capacity(positions.len());
    let mut u_out = Vec::with_capacity(positions.len());
    let mut v_out = Vec::with_capacity(positions.len());
    for (slot, &pos) in positions.iter().enumerate() {
        // Each repetition contributes equally many terms, so pooling the
        // per-repetition log-means reproduces the grand density average.
        let u_i = log_mean_exp(&u_rep[slot])?;
        let v_i = log_mean_exp(&v_rep[slot])?;
        ids.push(data.id(pos));
        scores.push(u_i - v_i);
        u_out.push(u_i);
        v_out.push(v_i);
        standard_errors.push(log_average_se(&u_rep[slot], u_i, &v_rep[slot], v_i));
    }
    Ok(LooResult {
        ids,
        scores,
        standard_errors,
        u: u_out,
        v: v_out,
        repetitions: t_count,
        spec_hash: spec.hash(),
    })
}

/// Delta-method standard error of `log mean exp(a) - log mean exp(b)`.
fn log_average_se(a_rep: &[f64], a_pooled: f64, b_rep: &[f64], b_pooled: f64) -> f64 {
    #[allow(unused_imports)] // false positive: see math.rs
    use crate::math::F64Ext;
    if a_rep.len() < 2 {
        return 0.0;
    }
    let t = a_rep.len() as f64;
    let rel = |rep: &[f64], pooled: f64| -> f64 {
        // exp(rep - pooled) has mean 1; its spread is the relative error
        // of the density average, which is the error of its log.
        let scaled: Vec<f64> = rep.iter().map(|x| (x - pooled).exp()).collect();
        sample_std(&scaled) / t.sqrt()
    };
    let se_a = rel(a_rep, a_pooled);
    let se_b = rel(b_rep, b_pooled);
    (se_a * se_a + se_b * se_b).sqrt()
}

/// Score quantiles as a function of training progress.
///
/// Each `(rep, fold)` model is trained once with snapshots at the listed
/// epochs; at every checkpoint the full table is rebuilt from that epoch's
/// weights and the score quantiles recorded.
pub fn quantile_trace(
    spec: &EstimatorSpec,
    data: &Dataset,
    plan: &FoldPlan,
    checkpoints: &[usize],
    levels: &[f64],
) -> Result<QuantileTrace> {
    let crate::models::estimator::Family::Vae(config) = &spec.family else {
        return Err(CoreError::InvalidArgument(
            "quantile traces need an iterative (epoch-trained) family".into(),
        ));
    };
    if checkpoints.is_empty() {
        return Err(CoreError::EmptyInput("checkpoint list"));
    }
    if levels.is_empty() || levels.iter().any(|q| !(0.0..=1.0).contains(q)) {
        return Err(CoreError::InvalidArgument(
            "quantile levels must lie in [0, 1]".into(),
        ));
    }
    if plan.n() != data.n() {
        return Err(CoreError::InvalidPlan(format!(
            "plan covers {} observations, dataset has {}",
            plan.n(),
            data.n()
        )));
    }
    let n = data.n();
    let mut per_checkpoint: Vec<Vec<(usize, usize, Result<Vec<f64>>)>> =
        (0..checkpoints.len()).map(|_| Vec::new()).collect();
    for (rep, fold) in plan.coords() {
        let train = data.without(plan.holdout(rep, fold))?;
        let fit_seed = derive_fit_seed(plan.seed(), rep, fold);
        let snapshots = vae_train_checkpoints(&train, config, fit_seed, checkpoints)?;
        for (c, model) in snapshots.iter().enumerate() {
            let mut row_logp = Vec::with_capacity(n);
            for pos in 0..n {
                let eval_seed = derive_eval_seed(mix_in(fit_seed, c as u64), data.id(pos));
                row_logp.push(crate::models::estimator::FittedModel::Vae(model.clone())
                    .log_density_seeded(data.row(pos), eval_seed)?);
            }
            per_checkpoint[c].push((rep, fold, Ok(row_logp)));
        }
    }
    let mut values = Vec::with_capacity(checkpoints.len());
    for parts in per_checkpoint {
        let table = assemble_table(plan.clone(), spec.hash(), parts)?;
        let result = aggregate_scores(&table, false)?;
        values.push(
            levels
                .iter()
                .map(|&q| quantile(&result.m, q))
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    Ok(QuantileTrace {
        epochs: checkpoints.to_vec(),
        levels: levels.to_vec(),
        values,
        spec_hash: spec.hash(),
    })
}

/// Ids of the `ceil(fraction * n)` highest-scoring observations, ranked by
/// descending score with ties broken toward the smaller id.
pub fn top_fraction(result: &MemorizationResult, fraction: f64) -> Result<Vec<usize>> {
    #[allow(unused_imports)] // false positive: see math.rs
    use crate::math::F64Ext;
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(CoreError::InvalidArgument(format!(
            "need 0 < fraction <= 1, got {fraction}"
        )));
    }
    let n = result.m.len();
    let count = ((fraction * n as f64).ceil() as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| {
        result.m[b]
            .partial_cmp(&result.m[a])
            .expect("scores are finite")
            .then(result.ids[a].cmp(&result.ids[b]))
    });
    Ok(order[..count].iter().map(|&p| result.ids[p]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ShapeTag;
    use crate::fold::make_fold_plan;
    use crate::math::LN_2PI;
    use crate::models::estimator::Family;
    use crate::models::kde::Bandwidth;
    use crate::models::vae::{LikelihoodKind, VaeConfig};
    use alloc::vec;

    fn dataset_1d(values: &[f64]) -> Dataset {
        Dataset::from_rows("t", values.to_vec(), 1, ShapeTag::Flat).unwrap()
    }

    /// A family whose density ignores the training subset: one histogram
    /// bin spanning the data range with negligible privacy noise.
    fn constant_density_spec() -> EstimatorSpec {
        EstimatorSpec::new(Family::DpHistogram {
            edges: vec![vec![-100.0, 100.0]],
            epsilon: 1e12,
        })
    }

    #[test]
    fn table_shape_and_completeness() {
        let data = dataset_1d(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let plan = make_fold_plan(6, 3, 2, 11).unwrap();
        let spec = EstimatorSpec::new(Family::Kde {
            bandwidth: Bandwidth::Fixed(0.7),
        });
        let table = compute_logprob_table(&spec, &data, &plan).unwrap();
        assert!(table.is_complete());
        assert_eq!(table.entries.len(), 2);
        assert!(table.entries.iter().all(|rep| rep.len() == 3));
        assert!(table
            .entries
            .iter()
            .flatten()
            .all(|row| row.len() == 6 && row.iter().all(|p| p.is_finite())));
    }

    #[test]
    fn constant_density_scores_zero() {
        let data = dataset_1d(&[0.5, 1.5, 2.5, 3.5, 4.5, 5.5, 6.5, 7.5]);
        let plan = make_fold_plan(8, 4, 2, 3).unwrap();
        let table = compute_logprob_table(&constant_density_spec(), &data, &plan).unwrap();
        let result = aggregate_scores(&table, false).unwrap();
        assert!(result.m.iter().all(|&m| m.abs() < 1e-12), "{:?}", result.m);
        assert!(result.summary.mean.abs() < 1e-12);
    }

    #[test]
    fn aggregation_matches_hand_filled_table() {
        // Every in-training entry -97, every held-out entry -178.
        let plan = make_fold_plan(4, 2, 1, 0).unwrap();
        let mut entries = vec![vec![vec![0.0; 4]; 2]; 1];
        for (rep, fold) in plan.coords() {
            for i in 0..4 {
                entries[rep][fold][i] = if plan.is_held_out(rep, fold, i) {
                    -178.0
                } else {
                    -97.0
                };
            }
        }
        let table = LogProbTable {
            entries,
            plan,
            spec_hash: 0,
            failed: Vec::new(),
        };
        let result = aggregate_scores(&table, false).unwrap();
        for i in 0..4 {
            assert!((result.u[i] + 97.0).abs() < 1e-12);
            assert!((result.v[i] + 178.0).abs() < 1e-12);
            assert!((result.m[i] - 81.0).abs() < 1e-12);
        }
    }

    #[test]
    fn assembly_is_order_independent() {
        let data = dataset_1d(&[0.0, 0.7, 1.9, 3.0, 4.2]);
        let plan = make_fold_plan(5, 5, 2, 21).unwrap();
        let spec = EstimatorSpec::new(Family::Kde {
            bandwidth: Bandwidth::Fixed(0.5),
        });
        let sequential = compute_logprob_table(&spec, &data, &plan).unwrap();
        let mut parts: Vec<_> = plan
            .coords()
            .map(|(rep, fold)| (rep, fold, fit_fold(&spec, &data, &plan, rep, fold)))
            .collect();
        parts.reverse();
        let reassembled = assemble_table(plan.clone(), spec.hash(), parts).unwrap();
        assert_eq!(sequential, reassembled);
        assert_eq!(
            aggregate_scores(&sequential, false).unwrap(),
            aggregate_scores(&reassembled, false).unwrap()
        );
    }

    #[test]
    fn held_out_entries_match_closed_form_kde_loo() {
        let values = [0.0, 0.4, 1.1, 1.9, 2.3, 3.0, 3.8, 4.4];
        let data = dataset_1d(&values);
        let h = 0.6;
        let plan = make_fold_plan(8, 8, 1, 5).unwrap();
        let spec = EstimatorSpec::new(Family::Kde {
            bandwidth: Bandwidth::Fixed(h),
        });
        let table = compute_logprob_table(&spec, &data, &plan).unwrap();
        let n = values.len() as f64;
        let log_kernel_zero = -0.5 * (LN_2PI + (h * h).ln());
        for i in 0..values.len() {
            let (rep, fold) = plan
                .coords()
                .find(|&(rep, fold)| plan.is_held_out(rep, fold, i))
                .unwrap();
            let held_out = table.entries[rep][fold][i];
            // p_{-i}(x_i) = (n p(x_i) - K_h(0)) / (n - 1) with p the
            // full-data mixture.
            let full: f64 = values
                .iter()
                .map(|&xj| {
                    let d = values[i] - xj;
                    (-0.5 * (LN_2PI + (h * h).ln()) - d * d / (2.0 * h * h)).exp()
                })
                .sum::<f64>()
                / n;
            let expected = ((n * full - log_kernel_zero.exp()) / (n - 1.0)).ln();
            assert!(
                (held_out - expected).abs() < 1e-9,
                "i={i} held_out={held_out} expected={expected}"
            );
        }
    }

    #[test]
    fn kfold_at_k_n_matches_loo() {
        let data = dataset_1d(&[0.0, 0.9, 1.7, 2.8, 3.3, 4.1]);
        let seed = 17;
        let spec = EstimatorSpec::new(Family::Kde {
            bandwidth: Bandwidth::Fixed(0.8),
        });
        let plan = make_fold_plan(6, 6, 1, seed).unwrap();
        let table = compute_logprob_table(&spec, &data, &plan).unwrap();
        let kfold = aggregate_scores(&table, false).unwrap();
        let loo = loo_memorization(&spec, &data, seed, 1, None).unwrap();
        for (pos, &id) in loo.ids.iter().enumerate() {
            let m_kfold = kfold.score_of(id).unwrap();
            assert!(
                (m_kfold - loo.scores[pos]).abs() < 1e-12,
                "id={id} kfold={m_kfold} loo={}",
                loo.scores[pos]
            );
            assert_eq!(loo.standard_errors[pos], 0.0);
        }
    }

    #[test]
    fn loo_targets_subset_agrees_with_full_run() {
        let data = dataset_1d(&[0.0, 1.0, 2.0, 5.0]);
        let spec = EstimatorSpec::new(Family::Kde {
            bandwidth: Bandwidth::Fixed(1.0),
        });
        let all = loo_memorization(&spec, &data, 3, 1, None).unwrap();
        let some = loo_memorization(&spec, &data, 3, 1, Some(&[1, 3])).unwrap();
        assert_eq!(some.ids, vec![1, 3]);
        assert!((some.scores[0] - all.scores[1]).abs() < 1e-15);
        assert!((some.scores[1] - all.scores[3]).abs() < 1e-15);
        assert!(all.scores[3] > all.scores[1], "isolated point scores higher");
    }

    #[test]
    fn forced_aggregation_excludes_broken_observations() {
        let data = dataset_1d(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let plan = make_fold_plan(6, 3, 1, 2).unwrap();
        let spec = EstimatorSpec::new(Family::Kde {
            bandwidth: Bandwidth::Fixed(0.5),
        });
        let parts: Vec<_> = plan
            .coords()
            .map(|(rep, fold)| {
                let outcome = if fold == 1 {
                    Err(CoreError::FitFailed("synthetic abort".into()))
                } else {
                    fit_fold(&spec, &data, &plan, rep, fold)
                };
                (rep, fold, outcome)
            })
            .collect();
        let table = assemble_table(plan.clone(), spec.hash(), parts).unwrap();
        assert_eq!(table.failed, vec![(0, 1)]);
        assert!(matches!(
            aggregate_scores(&table, false),
            Err(CoreError::PartialTable { failed: 1 })
        ));
        let forced = aggregate_scores(&table, true).unwrap();
        // L = 1, so members of the failed holdout have no held-out entry.
        let broken: Vec<usize> = plan.holdout(0, 1).to_vec();
        assert_eq!(forced.excluded, broken);
        assert_eq!(forced.ids.len(), 6 - broken.len());
        assert!(forced.ids.iter().all(|id| !broken.contains(id)));
    }

    #[test]
    fn top_fraction_rules() {
        let result = MemorizationResult {
            ids: vec![0, 1, 2, 3],
            u: vec![0.0; 4],
            v: vec![0.0; 4],
            m: vec![1.0, 2.0, 3.0, 4.0],
            held_out_spread: vec![0.0; 4],
            excluded: Vec::new(),
            summary: ScoreSummary::from_scores(&[1.0, 2.0, 3.0, 4.0]).unwrap(),
            k: 2,
            l: 1,
            seed: 0,
            spec_hash: 0,
        };
        assert_eq!(top_fraction(&result, 0.25).unwrap(), vec![3]);
        let mut all = top_fraction(&result, 1.0).unwrap();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2, 3]);
        assert!(top_fraction(&result, 0.0).is_err());
        assert!(top_fraction(&result, 1.5).is_err());

        let tied = MemorizationResult {
            m: vec![5.0, 5.0, 1.0, 5.0],
            ..result
        };
        assert_eq!(top_fraction(&tied, 0.5).unwrap(), vec![0, 1]);
    }

    #[test]
    fn ceiling_rule_sizes() {
        let scores: Vec<f64> = (0..200).map(|i| i as f64).collect();
        let result = MemorizationResult {
            ids: (0..200).collect(),
            u: vec![0.0; 200],
            v: vec![0.0; 200],
            m: scores.clone(),
            held_out_spread: vec![0.0; 200],
            excluded: Vec::new(),
            summary: ScoreSummary::from_scores(&scores).unwrap(),
            k: 2,
            l: 1,
            seed: 0,
            spec_hash: 0,
        };
        assert_eq!(top_fraction(&result, 0.05).unwrap().len(), 10);
    }

    #[test]
    fn quantile_trace_shape_and_validation() {
        let mut rows = Vec::new();
        for i in 0..8 {
            rows.push(i as f64 * 0.1);
            rows.push(1.0 - i as f64 * 0.1);
        }
        let data = Dataset::from_rows("t", rows, 2, ShapeTag::Flat).unwrap();
        let mut config = VaeConfig::new(1, Vec::new(), LikelihoodKind::IsotropicGaussian);
        config.epochs = 2;
        config.importance_samples = 4;
        config.batch_size = 4;
        let spec = EstimatorSpec::new(Family::Vae(config));
        let plan = make_fold_plan(8, 2, 1, 1).unwrap();
        let trace = quantile_trace(&spec, &data, &plan, &[1, 2], &TRACE_LEVELS).unwrap();
        assert_eq!(trace.epochs, vec![1, 2]);
        assert_eq!(trace.values.len(), 2);
        assert!(trace.values.iter().all(|v| v.len() == 2));
        assert!(trace
            .values
            .iter()
            .flatten()
            .all(|q| q.is_finite()));
        // 0.999 quantile is never below the 0.95 quantile.
        assert!(trace.values.iter().all(|v| v[1] >= v[0]));

        assert!(quantile_trace(&spec, &data, &plan, &[2, 1], &TRACE_LEVELS).is_err());
        let kde = EstimatorSpec::new(Family::Kde {
            bandwidth: Bandwidth::Fixed(1.0),
        });
        assert!(quantile_trace(&kde, &data, &plan, &[1], &TRACE_LEVELS).is_err());
    }
}
