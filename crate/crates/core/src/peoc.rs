//! The policy-entropy out-of-distribution classifier (PEOC).
//!
//! A stored policy snapshot scores a state by the entropy of its action
//! distribution there. States the policy was trained on should get confident,
//! low-entropy predictions; unfamiliar states should not. OOD is the positive
//! class throughout, so a higher score means "more out-of-distribution".

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::nn::{entropy_of, softmax_into, PolicyCache, PolicyParams};

/// Common interface of every one-class scorer in the benchmark.
pub trait Classifier {
    fn name(&self) -> &str;

    /// Higher means more out-of-distribution.
    fn score(&self, obs: &[f64]) -> Result<f64>;

    fn score_all(&self, observations: &[Vec<f64>]) -> Result<Vec<f64>> {
        observations.iter().map(|o| self.score(o)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SnapshotTag {
    AfterFirstUpdate,
    AfterLastUpdate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicySnapshot {
    pub params: PolicyParams,
    pub tag: SnapshotTag,
    pub training_seed: u64,
    pub update_index: usize,
}

impl PolicySnapshot {
    pub fn new(params: PolicyParams, tag: SnapshotTag, training_seed: u64, update_index: usize) -> Result<Self> {
        if !params.set.is_finite() {
            return Err(Error::Format("snapshot parameters must be finite".into()));
        }
        if tag == SnapshotTag::AfterFirstUpdate && update_index != 1 {
            return Err(Error::InvalidConfig(alloc::format!(
                "first-update snapshot must have update index 1, got {update_index}"
            )));
        }
        Ok(Self { params, tag, training_seed, update_index })
    }
}

/// Entropy (nats) of the snapshot's action distribution at `obs`.
pub fn peoc_score(snapshot: &PolicySnapshot, obs: &[f64]) -> Result<f64> {
    let mut cache = PolicyCache::new(&snapshot.params.arch);
    let mut probs = alloc::vec![0.0; snapshot.params.arch.n_actions];
    score_with(&snapshot.params, obs, &mut cache, &mut probs)
}

fn score_with(params: &PolicyParams, obs: &[f64], cache: &mut PolicyCache, probs: &mut [f64]) -> Result<f64> {
    params.forward_cached(obs, cache)?;
    softmax_into(&cache.logits, probs);
    Ok(entropy_of(probs))
}

/// A named PEOC classifier.
#[derive(Debug, Clone)]
pub struct Peoc {
    name: String,
    snapshot: PolicySnapshot,
}

impl Peoc {
    pub fn new(name: impl Into<String>, snapshot: PolicySnapshot) -> Self {
        Self { name: name.into(), snapshot }
    }

    pub fn snapshot(&self) -> &PolicySnapshot {
        &self.snapshot
    }
}

impl Classifier for Peoc {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&self, obs: &[f64]) -> Result<f64> {
        peoc_score(&self.snapshot, obs)
    }

    fn score_all(&self, observations: &[Vec<f64>]) -> Result<Vec<f64>> {
        let arch = &self.snapshot.params.arch;
        let mut cache = PolicyCache::new(arch);
        let mut probs = alloc::vec![0.0; arch.n_actions];
        observations.iter().map(|o| score_with(&self.snapshot.params, o, &mut cache, &mut probs)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Separation {
    pub perfectly_separable: bool,
    /// `min(ood) - max(ind)`; positive exactly when separable.
    pub margin: f64,
}

/// Whether every in-distribution score is strictly below every OOD score.
pub fn separation_check(scores_ind: &[f64], scores_ood: &[f64]) -> Result<Separation> {
    if scores_ind.is_empty() {
        return Err(Error::EmptyInput("in-distribution scores"));
    }
    if scores_ood.is_empty() {
        return Err(Error::EmptyInput("out-of-distribution scores"));
    }
    let max_ind = scores_ind.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_ood = scores_ood.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(Separation { perfectly_separable: max_ind < min_ood, margin: min_ood - max_ind })
}
