//! Utterance-level informed features from contours.

use std::collections::BTreeMap;

use super::contours::AcousticContours;
use super::normalize::population_std;
use super::schema::{InformedFeatureSchema, Source};
use crate::error::{Error, Result};

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn std(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        population_std(v)
    }
}

/// Mean absolute difference of consecutive values, in percent of the mean
/// value. Sequences are not joined across segments.
pub fn local_perturbation(seqs: &[Vec<f64>]) -> f64 {
    let all: Vec<f64> = seqs.concat();
    let diffs: Vec<f64> = seqs
        .iter()
        .flat_map(|s| s.windows(2).map(|w| (w[1] - w[0]).abs()))
        .collect();
    let m = mean(&all);
    if diffs.is_empty() || m == 0.0 {
        return 0.0;
    }
    100.0 * mean(&diffs) / m
}

/// Five-point perturbation quotient: mean absolute deviation of each value
/// from the average of itself and its two neighbours on each side, in
/// percent of the mean value.
pub fn perturbation_quotient5(seqs: &[Vec<f64>]) -> f64 {
    let all: Vec<f64> = seqs.concat();
    let devs: Vec<f64> = seqs
        .iter()
        .flat_map(|s| s.windows(5).map(|w| (w[2] - w.iter().sum::<f64>() / 5.0).abs()))
        .collect();
    let m = mean(&all);
    if devs.is_empty() || m == 0.0 {
        return 0.0;
    }
    100.0 * mean(&devs) / m
}

/// Every feature this crate can compute, by schema name. Statistics over
/// an empty set are reported as 0.
pub fn computed_features(c: &AcousticContours) -> BTreeMap<&'static str, f64> {
    let f1: Vec<f64> = c.formants.iter().map(|f| f.0).collect();
    let f2: Vec<f64> = c.formants.iter().map(|f| f.1).collect();
    let voiced_f0: Vec<f64> = c.f0.iter().copied().filter(|&f| f > 0.0).collect();
    let df0: Vec<f64> = c
        .f0
        .windows(2)
        .filter(|w| w[0] > 0.0 && w[1] > 0.0)
        .map(|w| w[1] - w[0])
        .collect();
    let active_e: Vec<f64> = c
        .energy
        .iter()
        .zip(&c.active)
        .filter(|(_, &a)| a)
        .map(|(&e, _)| e)
        .collect();
    let voiced_e: Vec<f64> = c
        .energy
        .iter()
        .zip(&c.f0)
        .filter(|(_, &f)| f > 0.0)
        .map(|(&e, _)| e)
        .collect();
    let pauses: Vec<f64> = c.pauses.iter().map(|(s, e)| e - s).collect();
    let voiced_time: f64 = c.voiced_segments.iter().map(|(s, e)| e - s).sum();
    let vvu = if c.duration_s > 0.0 { (voiced_time / c.duration_s).min(1.0) } else { 0.0 };

    BTreeMap::from([
        ("avg_F1", mean(&f1)),
        ("std_F1", std(&f1)),
        ("avg_F2", mean(&f2)),
        ("std_F2", std(&f2)),
        ("avg_jitter", local_perturbation(&c.periods)),
        ("avg_shimmer", local_perturbation(&c.amplitudes)),
        ("avg_APQ", perturbation_quotient5(&c.amplitudes)),
        ("avg_PPQ", perturbation_quotient5(&c.periods)),
        ("avg_logE", mean(&active_e)),
        ("avg_DF0", mean(&df0)),
        ("std_DF0", std(&df0)),
        ("avg_F0", mean(&voiced_f0)),
        ("std_F0", std(&voiced_f0)),
        ("avg_Evoiced", mean(&voiced_e)),
        ("std_Evoiced", std(&voiced_e)),
        ("Vrate", c.voiced_segments.len() as f64 / c.duration_s),
        ("avg_pause", mean(&pauses)),
        ("std_pause", std(&pauses)),
        ("UVU", 1.0 - vvu),
        ("VVU", vvu),
    ])
}

/// Fills a vector in schema order: computed entries from the contours,
/// external entries copied from `external`.
pub fn assemble_informed_vector(
    c: &AcousticContours,
    external: &BTreeMap<String, f64>,
    schema: &InformedFeatureSchema,
) -> Result<Vec<f64>> {
    let computed = computed_features(c);
    schema
        .entries()
        .iter()
        .map(|e| {
            let v = match e.source {
                Source::External => *external
                    .get(&e.name)
                    .ok_or_else(|| Error::Schema(format!("missing external feature '{}'", e.name)))?,
                Source::Computed => *computed
                    .get(e.name.as_str())
                    .ok_or_else(|| Error::Schema(format!("no extractor for computed feature '{}'", e.name)))?,
            };
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("feature '{}'", e.name),
                });
            }
            Ok(v)
        })
        .collect()
}
