//! Plot-ready CSV (long format) and JSON summaries.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::relevance::{argmax, EmbeddingRelevance};
use super::temporal::{ContrastiveProfile, OverlayRow};
use crate::data::Label;
use crate::error::{Error, Result};
use crate::features::{Category, InformedFeatureSchema};
use crate::tensor::Matrix;

pub const CSV_HEADER: &str = "utterance_id,label,frame,key,value\n";
pub const REFERENCE_ID: &str = "HC_REFERENCE";

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn push_row(out: &mut String, id: &str, label: &str, frame: Option<usize>, key: &str, value: f64) {
    let frame = frame.map(|f| f.to_string()).unwrap_or_default();
    let _ = writeln!(out, "{},{label},{frame},{},{value}", quote(id), quote(key));
}

/// Per-utterance relevance vectors, one row per feature, frame left empty.
pub fn relevance_csv(r: &EmbeddingRelevance, schema: &InformedFeatureSchema) -> Result<String> {
    let names: Vec<&str> = schema.names().collect();
    let mut out = String::from(CSV_HEADER);
    for u in &r.per_utterance {
        if u.relevance.len() != names.len() {
            return Err(Error::Schema(format!(
                "relevance has {} entries, schema has {}",
                u.relevance.len(),
                names.len()
            )));
        }
        for (name, v) in names.iter().zip(&u.relevance) {
            push_row(&mut out, &u.utterance_id, u.label.as_str(), None, name, *v);
        }
    }
    Ok(out)
}

/// Frame-level matrices (`T×K`) with column names `keys`.
pub fn frames_csv(rows: &[(&str, &str, &Matrix)], keys: &[&str]) -> Result<String> {
    let mut out = String::from(CSV_HEADER);
    for (id, label, m) in rows {
        if m.cols() != keys.len() {
            return Err(Error::Shape {
                op: "frames_csv",
                left: m.shape(),
                right: (m.rows(), keys.len()),
            });
        }
        for t in 0..m.rows() {
            for (k, key) in keys.iter().enumerate() {
                push_row(&mut out, id, label, Some(t), key, m.get(t, k));
            }
        }
    }
    Ok(out)
}

pub fn category_keys() -> [&'static str; 4] {
    Category::ALL.map(Category::as_str)
}

/// The HC reference followed by each PD contrast.
pub fn profile_csv(p: &ContrastiveProfile, pd_ids: &[&str]) -> Result<String> {
    if pd_ids.len() != p.contrasts.len() {
        return Err(Error::InvalidArgument(format!(
            "{} PD ids for {} contrasts",
            pd_ids.len(),
            p.contrasts.len()
        )));
    }
    let mut rows = vec![(REFERENCE_ID, "HC", &p.reference)];
    rows.extend(pd_ids.iter().zip(&p.contrasts).map(|(id, m)| (*id, "PD", m)));
    frames_csv(&rows, &category_keys())
}

pub fn overlay_csv(utterance_id: &str, rows: &[OverlayRow]) -> String {
    let mut out = String::from("utterance_id,frame,time_s,phoneme,word,emphasized\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            quote(utterance_id),
            r.frame,
            r.time_s,
            quote(&r.phoneme),
            quote(&r.word),
            r.emphasized
        );
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryContrast {
    pub category: String,
    /// Mean contrast over PD utterances and frames.
    pub mean: f64,
    /// Mean over the second half of the reference frames.
    pub late_mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpretSummary {
    pub task: String,
    pub correct_only: bool,
    pub n_hc: usize,
    pub n_pd: usize,
    pub hc_mean: BTreeMap<String, f64>,
    pub pd_mean: BTreeMap<String, f64>,
    pub top_hc_feature: String,
    pub top_pd_feature: String,
    pub reference_length: Option<usize>,
    pub hc_dispersion: Option<f64>,
    pub category_contrast: Vec<CategoryContrast>,
}

pub fn category_contrast(p: &ContrastiveProfile) -> Vec<CategoryContrast> {
    let l = p.length;
    Category::ALL
        .iter()
        .enumerate()
        .map(|(c, cat)| {
            let (mut all, mut late, mut n_late) = (0.0, 0.0, 0usize);
            for m in &p.contrasts {
                for t in 0..l {
                    all += m.get(t, c);
                    if t >= l / 2 {
                        late += m.get(t, c);
                        n_late += 1;
                    }
                }
            }
            let n = (p.contrasts.len() * l).max(1);
            CategoryContrast {
                category: cat.as_str().to_string(),
                mean: all / n as f64,
                late_mean: late / n_late.max(1) as f64,
            }
        })
        .collect()
}

pub fn summarize(
    r: &EmbeddingRelevance,
    schema: &InformedFeatureSchema,
    profile: Option<&ContrastiveProfile>,
) -> InterpretSummary {
    let names: Vec<&str> = schema.names().collect();
    let named = |v: &[f64]| -> BTreeMap<String, f64> { names.iter().map(|n| n.to_string()).zip(v.iter().copied()).collect() };
    let count = |l: Label| r.per_utterance.iter().filter(|u| u.label == l).count();
    InterpretSummary {
        task: r.task.clone(),
        correct_only: r.correct_only,
        n_hc: count(Label::Hc),
        n_pd: count(Label::Pd),
        hc_mean: named(&r.hc_mean),
        pd_mean: named(&r.pd_mean),
        top_hc_feature: names.get(argmax(&r.hc_mean)).map(|s| s.to_string()).unwrap_or_default(),
        top_pd_feature: names.get(argmax(&r.pd_mean)).map(|s| s.to_string()).unwrap_or_default(),
        reference_length: profile.map(|p| p.length),
        hc_dispersion: profile.map(|p| p.hc_dispersion),
        category_contrast: profile.map(category_contrast).unwrap_or_default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interpret::relevance::{embedding_relevance, ScoredUtterance};
    use crate::interpret::temporal::contrastive_profile;

    #[test]
    fn relevance_rows_and_summary() {
        let schema = InformedFeatureSchema::generic(4).unwrap();
        let a = Matrix::from_rows(&[[0.1, 0.2, 0.3, 0.4]]);
        let b = Matrix::from_rows(&[[0.7, 0.1, 0.1, 0.1]]);
        let items = [
            ScoredUtterance {
                utterance_id: "h,1",
                label: Label::Hc,
                predicted: Label::Hc,
                scores: &a,
            },
            ScoredUtterance {
                utterance_id: "p1",
                label: Label::Pd,
                predicted: Label::Pd,
                scores: &b,
            },
        ];
        let r = embedding_relevance(&items, true, "VOWELS").unwrap();
        let csv = relevance_csv(&r, &schema).unwrap();
        assert_eq!(csv.lines().count(), 1 + 8);
        assert!(csv.contains("\"h,1\",HC,,feat_00,0.1\n"));
        let s = summarize(&r, &schema, None);
        assert_eq!((s.top_hc_feature.as_str(), s.top_pd_feature.as_str()), ("feat_03", "feat_00"));
        assert_eq!((s.n_hc, s.n_pd), (1, 1));
    }

    #[test]
    fn profile_rows() {
        let hc = Matrix::filled(4, 4, 0.25);
        let mut pd = hc.clone();
        for t in 2..4 {
            pd.set(t, 3, 0.55);
            pd.set(t, 0, -0.05);
        }
        let p = contrastive_profile(&[hc], &[pd]).unwrap();
        let csv = profile_csv(&p, &["p"]).unwrap();
        assert_eq!(csv.lines().count(), 1 + 2 * 16);
        assert!(profile_csv(&p, &[]).is_err());
        let cc = category_contrast(&p);
        assert!((cc[3].late_mean - 0.3).abs() < 1e-12);
        assert!((cc[3].mean - 0.15).abs() < 1e-12);
    }
}
