//! Memorization auditing for probabilistic generative models.
//!
//! The crate implements a cross-validated memorization score: a density
//! estimator is fitted under a repeated K-fold leave-out protocol, and each
//! observation is scored by how much more likely it is under models that saw
//! it during training than under models that did not. Companion diagnostics
//! (nearest-neighbor distance ratios, during-training quantile traces, a
//! differential-privacy bound check, and an outlier-component mitigation)
//! live alongside the estimator.
//!
//! The crate is `no_std` (with `alloc`) and fully deterministic: every fit
//! seed is derived from a master seed and the fold coordinates, so results
//! are independent of execution order and degree of parallelism. All density
//! work happens in log space.

#![no_std]

extern crate alloc;

pub mod dataset;
pub mod error;
pub mod fold;
pub mod math;
pub mod memscore;
pub mod mitigate;
pub mod models;
pub mod nn_ratio;
pub mod numerics;
pub mod rng;
pub mod seed;

pub use dataset::{Dataset, ShapeTag};
pub use error::{CoreError, Result};
pub use fold::{make_fold_plan, FoldPlan};
pub use memscore::{
    aggregate_scores, compute_logprob_table, loo_memorization, quantile_trace, top_fraction,
    LogProbTable, LooResult, MemorizationResult, QuantileTrace,
};
pub use models::estimator::{fit_model, EstimatorSpec, Family, FittedModel};
pub use seed::{derive_eval_seed, derive_fit_seed};
