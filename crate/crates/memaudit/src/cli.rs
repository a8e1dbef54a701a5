//! Command-line orchestration. Every command is driven by one config
//! document (flags override individual keys), writes machine-readable
//! artifacts under the configured output directory, and reports progress
//! on standard error only.
//!
//! Exit codes: 0 success, 2 configuration or validation error, 3 compute
//! failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use memaudit_core::memscore::{
    aggregate_scores, loo_memorization, quantile_trace, top_fraction, LooResult,
    MemorizationResult, TRACE_LEVELS,
};
use memaudit_core::mitigate::dp_bound_check;
use memaudit_core::models::estimator::{fit_model, EstimatorSpec, Family, OutlierWrap};
use memaudit_core::nn_ratio::{distance_ratio, ratio_report};
use memaudit_core::rng::{ChaCha8Rng, SeedableRng};
use memaudit_core::seed::mix_in;
use memaudit_core::{make_fold_plan, CoreError, Dataset, FoldPlan};

use crate::config::{DataSource, MitigationStrategy, RunConfig};
use crate::io::report::{read_report, report_to_string, write_report, Provenance, ReportFile};
use crate::io::synth::SynthAnnotations;
use crate::io::transforms::hist_bins;
use crate::io::IoError;
use crate::parallel::compute_logprob_table_parallel;

#[derive(Debug, Parser)]
#[command(name = "memaudit", about = "Memorization audits for probabilistic generative models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Repeated K-fold memorization scores.
    Memscore(RunArgs),
    /// Exact leave-one-out scores (expensive; n*T fits).
    Loo(RunArgs),
    /// Nearest-neighbor distance-ratio diagnostic.
    NnRatio(RunArgs),
    /// Score quantiles across training checkpoints.
    Trace(RunArgs),
    /// Apply and evaluate a mitigation strategy.
    Mitigate(RunArgs),
    /// Materialize the configured synthetic dataset.
    Synth(RunArgs),
    /// Pretty-print a report file.
    Report { path: PathBuf },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Run configuration document (RON).
    #[arg(long)]
    pub config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the worker count.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Override the output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Aggregate partial tables instead of refusing them.
    #[arg(long)]
    pub force_partial: bool,
}

#[derive(Debug)]
pub enum CliError {
    /// Configuration or validation problem: exit code 2.
    Config(String),
    /// Compute failure: exit code 3.
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Compute(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Compute(m) => m,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> CliError {
        match e {
            CoreError::FitFailed(_) | CoreError::PartialTable { .. } => {
                CliError::Compute(e.to_string())
            }
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> CliError {
        match e {
            IoError::Io(_) => CliError::Compute(e.to_string()),
            IoError::Format(_) => CliError::Config(e.to_string()),
            IoError::Core(core) => core.into(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Memscore(args) => cmd_memscore(prepare(args)?),
        Command::Loo(args) => cmd_loo(prepare(args)?),
        Command::NnRatio(args) => cmd_nn_ratio(prepare(args)?),
        Command::Trace(args) => cmd_trace(prepare(args)?),
        Command::Mitigate(args) => cmd_mitigate(prepare(args)?),
        Command::Synth(args) => cmd_synth(prepare(args)?),
        Command::Report { path } => cmd_report(&path),
    }
}

/// Everything a command needs: validated config with overrides applied,
/// the loaded dataset, and provenance stamps.
pub struct Run {
    pub config: RunConfig,
    pub data: Dataset,
    pub annotations: Option<SynthAnnotations>,
    pub config_hash: u64,
}

fn prepare(args: RunArgs) -> CliResult<Run> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(workers) = args.workers {
        config.workers = workers;
    }
    if let Some(out) = args.out {
        config.out_dir = out;
    }
    if args.force_partial {
        config.force_partial = true;
    }
    config.validate()?;
    let config_hash = config.hash()?;
    let (data, annotations) = config.load_dataset()?;
    std::fs::create_dir_all(&config.out_dir)
        .map_err(|e| CliError::Compute(format!("output directory: {e}")))?;
    eprintln!(
        "loaded {} observations of dimension {} (config hash {config_hash:016x})",
        data.n(),
        data.dim()
    );
    Ok(Run {
        config,
        data,
        annotations,
        config_hash,
    })
}

fn provenance(run: &Run) -> Provenance {
    Provenance {
        spec_hash: Some(run.config.estimator.hash()),
        config_hash: Some(run.config_hash),
        seed: Some(run.config.seed),
        created: None,
    }
}

fn fold_plan(run: &Run) -> CliResult<FoldPlan> {
    Ok(make_fold_plan(
        run.data.n(),
        run.config.k,
        run.config.l,
        run.config.seed,
    )?)
}

fn kfold_scores(run: &Run, spec: &EstimatorSpec) -> CliResult<(FoldPlan, MemorizationResult)> {
    let plan = fold_plan(run)?;
    eprintln!(
        "fitting {} fold models on {} workers",
        plan.l() * plan.k(),
        run.config.workers
    );
    let table = compute_logprob_table_parallel(spec, &run.data, &plan, run.config.workers)?;
    if !table.is_complete() && !run.config.force_partial {
        return Err(CliError::Compute(format!(
            "{} fold fits failed: {:?} (use --force-partial to aggregate anyway)",
            table.failed.len(),
            table.failed
        )));
    }
    let scores = aggregate_scores(&table, run.config.force_partial)?;
    Ok((plan, scores))
}

fn write_lines(path: &Path, lines: &[String]) -> CliResult<()> {
    let mut file = std::fs::File::create(path)
        .map_err(|e| CliError::Compute(format!("{}: {e}", path.display())))?;
    for line in lines {
        writeln!(file, "{line}").map_err(|e| CliError::Compute(e.to_string()))?;
    }
    Ok(())
}

fn cmd_memscore(run: Run) -> CliResult<()> {
    let (plan, scores) = kfold_scores(&run, &run.config.estimator)?;
    let top = top_fraction(&scores, run.config.top_fraction)?;
    let histogram = hist_bins(&scores.m, &scores.ids, &top, run.config.bin_width)?;
    let p95 = scores
        .summary
        .percentiles
        .iter()
        .find(|(level, _)| *level == 0.95)
        .map(|(_, value)| *value)
        .unwrap_or(f64::NAN);

    let mut report = ReportFile::new("k-fold memorization scores");
    report.provenance = provenance(&run);
    report.plan = Some(plan);
    report.scores = Some(scores.clone());
    report.histogram = Some(histogram.clone());
    report.annotations = run.annotations.clone();
    write_report(&report, &run.config.out_dir.join("memscore.report"))?;

    let mut lines = vec![
        format!("# score histogram, bin width {}", run.config.bin_width),
        format!("# p95 marker = {p95}"),
        "lo,hi,memorized,regular,proportion".to_string(),
    ];
    for bin in &histogram.bins {
        lines.push(format!(
            "{},{},{},{},{}",
            bin.lo, bin.hi, bin.memorized, bin.regular, bin.proportion
        ));
    }
    write_lines(&run.config.out_dir.join("score_histogram.csv"), &lines)?;
    eprintln!(
        "scored {} observations; median {}, p95 {p95}",
        scores.ids.len(),
        scores.summary.median
    );
    Ok(())
}

fn run_loo(run: &Run, spec: &EstimatorSpec) -> CliResult<LooResult> {
    let fits = run.data.n() * run.config.loo_repetitions;
    if fits > 10_000 && !run.config.acknowledge_fit_budget {
        return Err(CliError::Config(format!(
            "LOO needs {fits} fits; set acknowledge_fit_budget to proceed"
        )));
    }
    eprintln!("running exact LOO: {fits} fits");
    Ok(loo_memorization(
        spec,
        &run.data,
        run.config.seed,
        run.config.loo_repetitions,
        run.config.loo_targets.as_deref(),
    )?)
}

fn cmd_loo(run: Run) -> CliResult<()> {
    let loo = run_loo(&run, &run.config.estimator)?;
    let mut report = ReportFile::new("exact leave-one-out memorization scores");
    report.provenance = provenance(&run);
    if loo.repetitions == 1 && !run.config.estimator.family.is_deterministic() {
        report.notes.push(
            "single repetition of a stochastic family: standard errors are not estimable"
                .to_string(),
        );
    }
    report.loo = Some(loo);
    report.annotations = run.annotations.clone();
    write_report(&report, &run.config.out_dir.join("loo.report"))?;
    Ok(())
}

fn cmd_nn_ratio(run: Run) -> CliResult<()> {
    let Some(validation_source) = &run.config.validation else {
        return Err(CliError::Config(
            "nn-ratio needs a validation dataset in the config".into(),
        ));
    };
    let (validation, _) = RunConfig::load_source(validation_source)?;
    let samples = if run.config.samples_from_validation {
        validation.clone()
    } else {
        let model = fit_model(
            &run.config.estimator,
            &run.data,
            mix_in(run.config.seed, 0x73616d70),
        )?;
        let mut rng = ChaCha8Rng::seed_from_u64(mix_in(run.config.seed, 0x64726177));
        let draws = model.sample(&mut rng, validation.n())?;
        Dataset::from_rows(
            "samples",
            draws.into_iter().flatten().collect(),
            run.data.dim(),
            run.data.shape(),
        )?
    };
    let rho = distance_ratio(&run.data, &validation, &samples)?;
    let (_, scores) = kfold_scores(&run, &run.config.estimator)?;
    let ratio = ratio_report(
        &rho,
        &scores,
        run.config.bin_width,
        run.config.top_fraction,
    )?;

    let mut lines = vec!["bin_center,mean_rho,standard_error,count".to_string()];
    for bin in &ratio.bins {
        lines.push(format!(
            "{},{},{},{}",
            0.5 * (bin.lo + bin.hi),
            bin.mean_rho,
            bin.standard_error.map_or(String::new(), |se| se.to_string()),
            bin.count
        ));
    }
    write_lines(&run.config.out_dir.join("ratio_bins.csv"), &lines)?;

    let mut report = ReportFile::new("nearest-neighbor distance ratios");
    report.provenance = provenance(&run);
    if !ratio.flagged.is_empty() {
        report.notes.push(format!(
            "{} observation(s) had zero sample distance (exact duplicates)",
            ratio.flagged.len()
        ));
    }
    report.scores = Some(scores);
    report.ratio = Some(ratio);
    write_report(&report, &run.config.out_dir.join("ratio.report"))?;
    Ok(())
}

fn cmd_trace(run: Run) -> CliResult<()> {
    if run.config.checkpoints.is_empty() {
        return Err(CliError::Config(
            "trace needs a non-empty checkpoints list in the config".into(),
        ));
    }
    let plan = fold_plan(&run)?;
    eprintln!(
        "training {} fold models with {} checkpoints each",
        plan.l() * plan.k(),
        run.config.checkpoints.len()
    );
    let trace = quantile_trace(
        &run.config.estimator,
        &run.data,
        &plan,
        &run.config.checkpoints,
        &TRACE_LEVELS,
    )?;

    let mut lines = vec!["epoch,q95,q999".to_string()];
    for (epoch, values) in trace.epochs.iter().zip(&trace.values) {
        lines.push(format!("{},{},{}", epoch, values[0], values[1]));
    }
    write_lines(&run.config.out_dir.join("trace.csv"), &lines)?;

    let mut report = ReportFile::new("memorization quantiles during training");
    report.provenance = provenance(&run);
    report.plan = Some(plan);
    report.trace = Some(trace);
    write_report(&report, &run.config.out_dir.join("trace.report"))?;
    Ok(())
}

fn cmd_mitigate(run: Run) -> CliResult<()> {
    let Some(strategy) = run.config.mitigation.clone() else {
        return Err(CliError::Config(
            "mitigate needs a mitigation strategy in the config".into(),
        ));
    };
    let mut report = ReportFile::new("mitigation evaluation");
    report.provenance = provenance(&run);
    report.annotations = run.annotations.clone();
    match strategy {
        MitigationStrategy::Outlier {
            weight,
            variance_scale,
        } => {
            let base_spec = run.config.estimator.clone();
            let wrapped_spec = base_spec.clone().with_outlier(OutlierWrap {
                weight,
                variance_scale,
            });
            let (_, before) = kfold_scores(&run, &base_spec)?;
            let (_, after) = kfold_scores(&run, &wrapped_spec)?;
            let max_before = before.m.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let max_after = after.m.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            report.notes.push(format!(
                "outlier component w={weight}, variance scale {variance_scale}: \
                 max score {max_before} -> {max_after}"
            ));
            report.scores = Some(before);
            report.scores_after = Some(after);
            eprintln!("max score before {max_before}, after {max_after}");
        }
        MitigationStrategy::Dp => {
            let Family::DpHistogram { epsilon, .. } = run.config.estimator.family else {
                return Err(CliError::Config(
                    "dp mitigation needs a dp-histogram estimator family".into(),
                ));
            };
            if run.config.loo_repetitions < 2 {
                return Err(CliError::Config(
                    "dp bound check needs loo_repetitions >= 2 for error bars".into(),
                ));
            }
            let loo = run_loo(&run, &run.config.estimator)?;
            let verdict = dp_bound_check(&loo.scores, &loo.standard_errors, &loo.ids, epsilon)?;
            eprintln!(
                "max LOO score {} +- {} against epsilon {}: {}",
                verdict.max_score,
                verdict.standard_error,
                verdict.epsilon,
                if verdict.pass { "pass" } else { "FAIL" }
            );
            report.loo = Some(loo);
            report.dp_verdict = Some(verdict);
        }
    }
    write_report(&report, &run.config.out_dir.join("mitigate.report"))?;
    Ok(())
}

fn cmd_synth(run: Run) -> CliResult<()> {
    let DataSource::Synth(_) = &run.config.dataset else {
        return Err(CliError::Config(
            "synth needs a synthetic dataset source in the config".into(),
        ));
    };
    crate::io::csv::write_csv(&run.data, &run.config.out_dir.join("synth.csv"))?;
    let mut report = ReportFile::new("synthetic dataset ground truth");
    report.provenance = provenance(&run);
    report.annotations = run.annotations.clone();
    write_report(&report, &run.config.out_dir.join("synth.report"))?;
    eprintln!("wrote {} rows", run.data.n());
    Ok(())
}

fn cmd_report(path: &Path) -> CliResult<()> {
    let report = read_report(path)?;
    println!("{}", report_to_string(&report)?);
    Ok(())
}
