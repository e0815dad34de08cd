use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use parkattn::data::{load_manifest_unchecked, write_manifest, write_sfm1, Dtype, UtteranceRecord};
use parkattn::features::{
    assemble_informed_vector, condition_audio, extract_contours, read_wav, write_wav, ContourConfig,
    InformedFeatureSchema,
};
use parkattn::tensor::Matrix;
use parkattn::training::parallel_map;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::train::resolve_schema;
use crate::CmdResult;

#[derive(Args)]
pub struct ExtractArgs {
    /// Directory holding `<utterance_id>.wav`.
    #[arg(long)]
    pub audio_dir: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// JSON object `{utterance_id: {feature: value}}` with the externally computed features.
    #[arg(long)]
    pub external_features: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Also write the conditioned 16 kHz audio to `<out-dir>/audio/`.
    #[arg(long)]
    pub write_audio: bool,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Serialize)]
struct ExtractFailure {
    utterance_id: String,
    error: String,
}

type External = BTreeMap<String, BTreeMap<String, f64>>;

fn extract_one(
    r: &UtteranceRecord,
    a: &ExtractArgs,
    schema: &InformedFeatureSchema,
    external: &External,
) -> anyhow::Result<UtteranceRecord> {
    let wav = a.audio_dir.join(format!("{}.wav", r.utterance_id));
    let (samples, rate) = read_wav(&wav)?;
    let audio = condition_audio(&samples, rate)?;
    if audio.silent {
        log::warn!("{}: no audible block, loudness gain skipped", r.utterance_id);
    }
    let contours = extract_contours(&audio.samples, audio.rate, &ContourConfig::default())?;
    let empty = BTreeMap::new();
    let values = assemble_informed_vector(&contours, external.get(&r.utterance_id).unwrap_or(&empty), schema)?;
    let mut meta = Map::new();
    meta.insert("utterance_id".into(), Value::String(r.utterance_id.clone()));
    meta.insert("schema_hash".into(), Value::String(schema.hash()));
    meta.insert("gain_db".into(), Value::from(audio.gain_db));
    if let Some(l) = audio.input_lufs {
        meta.insert("input_lufs".into(), Value::from(l));
    }
    let file = format!("inf/{}.sfm1", r.utterance_id);
    write_sfm1(a.out_dir.join(&file), &Matrix::row_vector(values), &meta, Dtype::F64)?;
    if a.write_audio {
        write_wav(a.out_dir.join(format!("audio/{}.wav", r.utterance_id)), &audio.samples, audio.rate)?;
    }
    let mut out = r.clone();
    out.inf_path = PathBuf::from(file);
    Ok(out)
}

fn load_external(path: Option<&Path>) -> anyhow::Result<External> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
        None => Ok(External::new()),
    }
}

pub fn run(a: ExtractArgs) -> CmdResult {
    let records = load_manifest_unchecked(&a.manifest)?;
    let (schema, _) = resolve_schema(a.schema.as_deref(), &a.manifest)?;
    let external = load_external(a.external_features.as_deref())?;
    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    if records.is_empty() {
        log::warn!("manifest {} lists no utterances, nothing to extract", a.manifest.display());
        return Ok(());
    }
    let results = parallel_map(&records, a.jobs, |r| extract_one(r, &a, &schema, &external));
    let mut done = Vec::new();
    let mut failures = Vec::new();
    for (r, res) in records.iter().zip(results) {
        match res {
            Ok(rec) => done.push(rec),
            Err(e) => {
                log::error!("{}: {e:#}", r.utterance_id);
                failures.push(ExtractFailure {
                    utterance_id: r.utterance_id.clone(),
                    error: format!("{e:#}"),
                });
            }
        }
    }
    write_manifest(a.out_dir.join("manifest.jsonl"), &done)?;
    std::fs::write(a.out_dir.join("schema.json"), schema.to_json())?;
    std::fs::write(a.out_dir.join("failures.json"), serde_json::to_string_pretty(&failures)?)?;
    println!("extracted {} of {} utterances", done.len(), records.len());
    if failures.is_empty() {
        Ok(())
    } else {
        Err(anyhow::anyhow!("{} utterance(s) failed, see failures.json", failures.len()).into())
    }
}
