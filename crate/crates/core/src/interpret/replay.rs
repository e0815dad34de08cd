//! Recomputes attention scores of a finished run from its checkpoints.

use std::path::Path;

use crate::data::Label;
use crate::error::{Error, Result};
use crate::model::Prediction;
use crate::training::{load_trained, Dataset, RunResult};

#[derive(Clone, Debug)]
pub struct ReplayedUtterance {
    /// Index into the dataset items.
    pub index: usize,
    pub fold: String,
    pub label: Label,
    pub prediction: Prediction,
}

impl ReplayedUtterance {
    pub fn predicted(&self) -> Label {
        Label::from_index(self.prediction.predicted_label)
    }

    pub fn is_correct(&self) -> bool {
        self.predicted() == self.label
    }
}

/// Seed with the highest mean test F1 over folds; ties go to the smaller
/// seed. Seeds with a failed run are skipped.
pub fn best_seed(result: &RunResult) -> Option<u64> {
    let mut best: Option<(u64, f64)> = None;
    for &seed in &result.config.seeds {
        let runs: Vec<_> = result.runs.iter().filter(|r| r.seed == seed).collect();
        if runs.is_empty() || runs.iter().any(|r| r.test_f1.is_none()) {
            continue;
        }
        let mean = runs.iter().filter_map(|r| r.test_f1).sum::<f64>() / runs.len() as f64;
        if best.is_none_or(|(_, m)| mean > m) {
            best = Some((seed, mean));
        }
    }
    best.map(|(s, _)| s)
}

/// Re-runs every stored test prediction of `seed` and checks that the
/// recomputed labels agree with the stored ones.
pub fn replay_run(data: &Dataset, run_dir: &Path, result: &RunResult, seed: u64) -> Result<Vec<ReplayedUtterance>> {
    if data.schema_hash != result.schema_hash || data.task != result.task {
        return Err(Error::Schema(format!(
            "run was trained on task {} with schema {}, dataset is task {} with schema {}",
            result.task, result.schema_hash, data.task, data.schema_hash
        )));
    }
    let mut out = Vec::new();
    let mut folds: Vec<&str> = result
        .runs
        .iter()
        .filter(|r| r.seed == seed && r.failure.is_none())
        .map(|r| r.fold.as_str())
        .collect();
    folds.dedup();
    if folds.is_empty() {
        return Err(Error::InsufficientData(format!("no successful runs for seed {seed}")));
    }
    for fold in folds {
        let model = load_trained(run_dir, fold, seed, &result.config)?;
        for p in result.predictions.iter().filter(|p| p.seed == seed && p.fold == fold) {
            let index = data.index_of(&p.utterance_id).ok_or_else(|| {
                Error::InvalidArgument(format!("utterance '{}' of the run is not in the dataset", p.utterance_id))
            })?;
            let prediction = model.predict(data, index)?;
            if prediction.predicted_label != p.predicted {
                return Err(Error::InvalidArgument(format!(
                    "checkpoint for fold {fold} seed {seed} does not reproduce the stored prediction of '{}'",
                    p.utterance_id
                )));
            }
            out.push(ReplayedUtterance {
                index,
                fold: fold.to_string(),
                label: data.items[index].record.label,
                prediction,
            });
        }
    }
    Ok(out)
}
