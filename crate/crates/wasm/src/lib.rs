//! Browser demo: attention heatmaps of an untrained model on a planted
//! synthetic pair, one-dimensional DTW, and loudness conditioning of a
//! test tone. Each operation returns JSON.

use parkattn::features::{condition_audio, integrated_loudness, Category, InformedFeatureSchema};
use parkattn::interpret::{aggregate_categories, dtw_align, synthesize, Aggregation, SyntheticConfig};
use parkattn::model::{ModelParams, Sample, Variant};
use parkattn::tensor::{Axis, Matrix};
use parkattn::data::Label;
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct UtteranceView {
    pub label: String,
    pub logits: [f64; 2],
    /// Mean of `S_emb` over embedding dimensions, one value per feature.
    pub relevance: Vec<f64>,
    /// `S_temp` summed per category, `T` rows of 4.
    pub temporal: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize)]
pub struct AttentionView {
    pub features: Vec<String>,
    pub categories: Vec<String>,
    pub planted: usize,
    pub hc: UtteranceView,
    pub pd: UtteranceView,
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

/// One HC and one PD utterance from a small planted corpus, scored by a
/// freshly initialised `cross_attn` model.
pub fn attention_view(effect_size: f64, seed: u64) -> Result<AttentionView, String> {
    let cfg = SyntheticConfig {
        n_speakers: 2,
        frames: 40,
        d: 32,
        effect_size,
        seed,
        utterances_per_speaker: 1,
        ..Default::default()
    };
    let schema = InformedFeatureSchema::default_schema();
    let utts = synthesize(&cfg).map_err(|e| e.to_string())?;
    let model = ModelParams::init(Variant::CrossAttn, cfg.d, cfg.f, seed).map_err(|e| e.to_string())?;
    let view = |label: Label| -> Result<UtteranceView, String> {
        let u = utts.iter().find(|u| u.record.label == label).ok_or("missing utterance")?;
        let inf = Matrix::row_vector(u.inf.clone());
        let p = model
            .forward(Sample { ssl: &u.ssl, inf: &inf })
            .map_err(|e| e.to_string())?;
        let temporal = p.temporal_scores.as_ref().ok_or("no temporal scores")?;
        let agg = aggregate_categories(temporal, &schema, Aggregation::Sum).map_err(|e| e.to_string())?;
        Ok(UtteranceView {
            label: label.to_string(),
            logits: p.logits,
            relevance: p.primary_scores.mean_axis(Axis::Rows).into_data(),
            temporal: rows(&agg),
        })
    };
    Ok(AttentionView {
        features: schema.names().map(str::to_string).collect(),
        categories: Category::ALL.iter().map(|c| c.as_str().to_string()).collect(),
        planted: cfg.planted_feature,
        hc: view(Label::Hc)?,
        pd: view(Label::Pd)?,
    })
}

#[derive(Debug, Serialize)]
pub struct DtwView {
    pub cost: f64,
    pub path: Vec<(usize, usize)>,
    pub warped: Vec<f64>,
}

pub fn dtw_view(seq: &[f64], reference: &[f64]) -> Result<DtwView, String> {
    if seq.is_empty() || reference.is_empty() {
        return Err("both sequences need at least one value".into());
    }
    let col = |v: &[f64]| Matrix::from_fn(v.len(), 1, |r, _| v[r]);
    let a = dtw_align(&col(seq), &col(reference)).map_err(|e| e.to_string())?;
    Ok(DtwView {
        cost: a.cost,
        path: a.path,
        warped: a.warped.into_data(),
    })
}

#[derive(Debug, Serialize)]
pub struct LoudnessView {
    pub rate: u32,
    pub input_lufs: Option<f64>,
    pub gain_db: f64,
    pub output_lufs: Option<f64>,
    pub remeasured_lufs: Option<f64>,
}

/// A sine tone at `peak_dbfs`, conditioned to 16 kHz and −23 LUFS.
pub fn loudness_view(freq_hz: f64, peak_dbfs: f64, rate: u32, seconds: f64) -> Result<LoudnessView, String> {
    if !(freq_hz > 0.0 && freq_hz < rate as f64 / 2.0) {
        return Err(format!("frequency must lie in (0, {}) Hz", rate / 2));
    }
    let n = (seconds * rate as f64).round() as usize;
    let amp = 10f64.powf(peak_dbfs / 20.0);
    let x: Vec<f64> = (0..n)
        .map(|i| amp * (2.0 * std::f64::consts::PI * freq_hz * i as f64 / rate as f64).sin())
        .collect();
    let c = condition_audio(&x, rate).map_err(|e| e.to_string())?;
    Ok(LoudnessView {
        rate: c.rate,
        input_lufs: c.input_lufs,
        gain_db: c.gain_db,
        output_lufs: c.output_lufs,
        remeasured_lufs: integrated_loudness(&c.samples, c.rate),
    })
}

fn to_json<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn attention_demo(effect_size: f64, seed: u32) -> Result<String, JsValue> {
    to_json(attention_view(effect_size, seed as u64))
}

#[wasm_bindgen]
pub fn dtw_demo(seq: Vec<f64>, reference: Vec<f64>) -> Result<String, JsValue> {
    to_json(dtw_view(&seq, &reference))
}

#[wasm_bindgen]
pub fn loudness_demo(freq_hz: f64, peak_dbfs: f64, rate: u32, seconds: f64) -> Result<String, JsValue> {
    to_json(loudness_view(freq_hz, peak_dbfs, rate, seconds))
}
