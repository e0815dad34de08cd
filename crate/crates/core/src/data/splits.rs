//! Speaker-independent stratified splits.
//!
//! The speaker is the unit of assignment: all utterances of a speaker
//! travel together. Speakers of each label are sorted, shuffled with a
//! seeded ChaCha8 stream and dealt round-robin into folds, so every fold
//! gets `⌊n/k⌋` or `⌈n/k⌉` speakers of each label.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::manifest::{Label, Task, UtteranceRecord};
use crate::error::{Error, Result};

pub const DEFAULT_OUTER_FOLDS: usize = 5;
pub const DEFAULT_INNER_FOLDS: usize = 4;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InnerFold {
    pub train: BTreeSet<String>,
    pub validation: BTreeSet<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OuterFold {
    pub train: BTreeSet<String>,
    pub test: BTreeSet<String>,
    pub inner: Vec<InnerFold>,
}

/// Nested cross-validation plan for one task.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub task: Task,
    pub seed: u64,
    pub folds: Vec<OuterFold>,
}

/// Maps each speaker of `task` to its label, rejecting speakers that
/// carry both labels.
pub fn speaker_labels(records: &[UtteranceRecord], task: Task) -> Result<BTreeMap<String, Label>> {
    let mut labels = BTreeMap::new();
    for r in records.iter().filter(|r| r.task == task) {
        match labels.insert(r.speaker_id.clone(), r.label) {
            Some(prev) if prev != r.label => {
                return Err(Error::InvalidArgument(format!(
                    "speaker '{}' appears with both {prev} and {} labels",
                    r.speaker_id, r.label
                )))
            }
            _ => {}
        }
    }
    Ok(labels)
}

/// Deals labelled speaker groups round-robin into `k` folds. The deal
/// position carries over between labels so fold sizes stay balanced.
fn deal(groups: &[Vec<String>], k: usize) -> Vec<BTreeSet<String>> {
    let mut folds = vec![BTreeSet::new(); k];
    let mut pos = 0;
    for group in groups {
        for s in group {
            folds[pos % k].insert(s.clone());
            pos += 1;
        }
    }
    folds
}

pub fn make_nested_splits(
    records: &[UtteranceRecord],
    task: Task,
    outer_k: usize,
    inner_k: usize,
    seed: u64,
) -> Result<SplitPlan> {
    if outer_k < 2 || inner_k < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 outer and 2 inner folds, got {outer_k} and {inner_k}"
        )));
    }
    let labels = speaker_labels(records, task)?;
    let mut groups: Vec<Vec<String>> = [Label::Hc, Label::Pd]
        .iter()
        .map(|l| labels.iter().filter(|(_, v)| *v == l).map(|(s, _)| s.clone()).collect())
        .collect();
    for (label, g) in [Label::Hc, Label::Pd].iter().zip(&groups) {
        if g.len() < outer_k {
            return Err(Error::InsufficientData(format!(
                "task {task} has {} {label} speakers; at least {outer_k} per label are required for {outer_k} outer folds",
                g.len()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for g in &mut groups {
        g.shuffle(&mut rng);
    }
    let tests = deal(&groups, outer_k);

    let mut folds = Vec::with_capacity(outer_k);
    for test in tests {
        let train_groups: Vec<Vec<String>> = groups
            .iter()
            .map(|g| g.iter().filter(|s| !test.contains(*s)).cloned().collect())
            .collect();
        for (label, g) in [Label::Hc, Label::Pd].iter().zip(&train_groups) {
            if g.len() < inner_k {
                return Err(Error::InsufficientData(format!(
                    "task {task}: an outer training split has {} {label} speakers; at least {inner_k} are required for {inner_k} inner folds",
                    g.len()
                )));
            }
        }
        let train: BTreeSet<String> = train_groups.iter().flatten().cloned().collect();
        let inner = deal(&train_groups, inner_k)
            .into_iter()
            .map(|validation| InnerFold {
                train: train.difference(&validation).cloned().collect(),
                validation,
            })
            .collect();
        folds.push(OuterFold { train, test, inner });
    }
    Ok(SplitPlan { task, seed, folds })
}

/// All records of `held_out` become the test set, everything else trains.
pub fn make_cross_lingual_splits(
    records: &[UtteranceRecord],
    held_out: &str,
) -> Result<(Vec<UtteranceRecord>, Vec<UtteranceRecord>)> {
    let datasets: BTreeSet<&str> = records.iter().map(|r| r.dataset_id.as_str()).collect();
    if !datasets.contains(held_out) {
        let available: Vec<_> = datasets.into_iter().collect();
        return Err(Error::InvalidArgument(format!(
            "unknown dataset '{held_out}', available: {}",
            available.join(", ")
        )));
    }
    if datasets.len() < 2 {
        return Err(Error::InsufficientData(
            "leave-one-dataset-out needs at least 2 datasets".into(),
        ));
    }
    let (test, train): (Vec<_>, Vec<_>) = records.iter().cloned().partition(|r| r.dataset_id == held_out);
    Ok((train, test))
}
