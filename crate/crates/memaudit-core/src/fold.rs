use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::rng::{shuffle, ChaCha8Rng, SeedableRng};
use crate::seed::derive_partition_seed;

/// The L x K leave-out structure: for every repetition, a random partition
/// of `0..n` into K disjoint holdout sets.
///
/// Each observation lands in exactly one holdout set per repetition, hence
/// in `L` holdout fits and `L * (K - 1)` training fits overall.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    n: usize,
    k: usize,
    l: usize,
    seed: u64,
    /// `holdouts[rep][fold]` is the sorted holdout index set.
    holdouts: Vec<Vec<Vec<usize>>>,
}

impl FoldPlan {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn holdout(&self, rep: usize, fold: usize) -> &[usize] {
        &self.holdouts[rep][fold]
    }

    /// All `(rep, fold)` coordinates in fixed order.
    pub fn coords(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.l).flat_map(move |rep| (0..self.k).map(move |fold| (rep, fold)))
    }

    /// Membership mask: `true` where observation `i` is held out in
    /// `(rep, fold)`.
    pub fn is_held_out(&self, rep: usize, fold: usize, i: usize) -> bool {
        self.holdouts[rep][fold].binary_search(&i).is_ok()
    }
}

/// Random partition of `[n]` into K disjoint folds, repeated L times.
///
/// When K does not divide n, the first `n mod K` folds of each repetition
/// take one extra element, so all sizes stay within 1 of each other.
pub fn make_fold_plan(n: usize, k: usize, l: usize, seed: u64) -> Result<FoldPlan> {
    if n < 2 {
        return Err(CoreError::InvalidDataset(format!(
            "fold plan needs n >= 2, got {n}"
        )));
    }
    if k < 2 || k > n {
        return Err(CoreError::InvalidPlan(format!(
            "need 2 <= K <= n, got K={k}, n={n}"
        )));
    }
    if l < 1 {
        return Err(CoreError::InvalidPlan("need L >= 1".into()));
    }
    let base = n / k;
    let extra = n % k;
    let mut holdouts = Vec::with_capacity(l);
    for rep in 0..l {
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_partition_seed(seed, rep));
        shuffle(&mut rng, &mut order);
        let mut folds = Vec::with_capacity(k);
        let mut cursor = 0;
        for fold in 0..k {
            let size = base + usize::from(fold < extra);
            let mut holdout = order[cursor..cursor + size].to_vec();
            holdout.sort_unstable();
            folds.push(holdout);
            cursor += size;
        }
        holdouts.push(folds);
    }
    Ok(FoldPlan {
        n,
        k,
        l,
        seed,
        holdouts,
    })
}
