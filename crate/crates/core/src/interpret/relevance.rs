use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};
use crate::tensor::{Axis, Matrix};

/// One scored test utterance.
#[derive(Clone, Debug)]
pub struct ScoredUtterance<'a> {
    pub utterance_id: &'a str,
    pub label: Label,
    pub predicted: Label,
    /// `S_emb`, `D×F`.
    pub scores: &'a Matrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRelevance {
    pub utterance_id: String,
    pub label: Label,
    /// Mean of the score rows, a probability vector over the features.
    pub relevance: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRelevance {
    pub task: String,
    pub correct_only: bool,
    pub per_utterance: Vec<UtteranceRelevance>,
    pub hc_mean: Vec<f64>,
    pub pd_mean: Vec<f64>,
    /// Mean `S_emb` per group.
    pub hc_scores: Matrix,
    pub pd_scores: Matrix,
    /// `hc_scores - pd_scores`.
    pub difference: Matrix,
}

fn mean_matrix(ms: &[&Matrix]) -> Result<Matrix> {
    let mut acc = Matrix::zeros(ms[0].rows(), ms[0].cols());
    for m in ms {
        acc.add_assign(m)?;
    }
    Ok(acc.scale(1.0 / ms.len() as f64))
}

/// Per-utterance relevance (mean over the embedding dimensions of
/// `S_emb`) and group aggregates. Averaging the per-utterance vectors and
/// averaging the group matrices first give the same result because both
/// are linear.
pub fn embedding_relevance(items: &[ScoredUtterance<'_>], correct_only: bool, task: &str) -> Result<EmbeddingRelevance> {
    let kept: Vec<&ScoredUtterance<'_>> = items
        .iter()
        .filter(|u| !correct_only || u.predicted == u.label)
        .collect();
    let group = |l: Label| -> Result<Vec<&Matrix>> {
        let g: Vec<&Matrix> = kept.iter().filter(|u| u.label == l).map(|u| u.scores).collect();
        if g.is_empty() {
            return Err(Error::InsufficientData(format!(
                "no {l} utterances{} to average",
                if correct_only { " predicted correctly" } else { "" }
            )));
        }
        Ok(g)
    };
    let (hc, pd) = (group(Label::Hc)?, group(Label::Pd)?);
    let shape = hc[0].shape();
    if let Some(bad) = kept.iter().find(|u| u.scores.shape() != shape) {
        return Err(Error::Shape {
            op: "embedding_relevance",
            left: shape,
            right: bad.scores.shape(),
        });
    }
    let per_utterance = kept
        .iter()
        .map(|u| UtteranceRelevance {
            utterance_id: u.utterance_id.to_string(),
            label: u.label,
            relevance: u.scores.mean_axis(Axis::Rows).into_data(),
        })
        .collect();
    let hc_scores = mean_matrix(&hc)?;
    let pd_scores = mean_matrix(&pd)?;
    Ok(EmbeddingRelevance {
        task: task.to_string(),
        correct_only,
        per_utterance,
        hc_mean: hc_scores.mean_axis(Axis::Rows).into_data(),
        pd_mean: pd_scores.mean_axis(Axis::Rows).into_data(),
        difference: hc_scores.sub(&pd_scores)?,
        hc_scores,
        pd_scores,
    })
}

pub fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best })
        .0
}
