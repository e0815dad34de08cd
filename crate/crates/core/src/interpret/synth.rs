//! Planted-signal synthetic corpus.
//!
//! Each speaker gets a standard normal informed vector; PD speakers are
//! shifted by `effect_size` on one planted feature; repeated utterances of
//! a speaker jitter that vector slightly. SSL frames mix a shared random
//! basis on top of a shared offset, and for PD speakers the weight of the
//! first basis vector tracks the planted feature, so both inputs carry the
//! signal.
//! With `effect_size = 0` the two groups are identically distributed.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::data::{write_manifest, write_sfm1, Dtype, Interval, Label, Task, Unit, UtteranceRecord};
use crate::error::{Error, Result};
use crate::features::InformedFeatureSchema;
use crate::tensor::Matrix;
use crate::training::Item;

const BASIS: usize = 8;
const FRAME_HOP_S: f64 = 0.02;
const PHONES: [&str; 10] = ["a", "e", "i", "o", "u", "p", "t", "k", "s", "m"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n_speakers: usize,
    pub frames: usize,
    pub d: usize,
    pub f: usize,
    pub planted_feature: usize,
    pub effect_size: f64,
    pub seed: u64,
    pub n_datasets: usize,
    pub utterances_per_speaker: usize,
    /// Weight of the planted feature in PD embeddings, per unit of effect.
    pub ssl_coupling: f64,
    /// Scale of the offset shared by every frame of every utterance.
    pub ssl_offset: f64,
    pub task: Task,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_speakers: 40,
            frames: 50,
            d: 64,
            f: 27,
            planted_feature: 3,
            effect_size: 3.0,
            seed: 0,
            n_datasets: 1,
            utterances_per_speaker: 10,
            ssl_coupling: 0.2,
            ssl_offset: 1.0,
            task: Task::Vowels,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_speakers == 0 || !self.n_speakers.is_multiple_of(2) {
            return bad(format!("n_speakers must be positive and even, got {}", self.n_speakers));
        }
        if self.frames == 0 || self.d == 0 || self.f == 0 {
            return bad("frames, d and f must be positive".into());
        }
        if self.planted_feature >= self.f {
            return bad(format!("planted feature {} is out of range for F = {}", self.planted_feature, self.f));
        }
        if self.n_datasets == 0 || self.n_datasets > self.n_speakers / 2 {
            return bad(format!(
                "n_datasets must be between 1 and {} (one HC/PD pair each)",
                self.n_speakers / 2
            ));
        }
        if self.utterances_per_speaker == 0 {
            return bad("utterances_per_speaker must be positive".into());
        }
        if ![self.effect_size, self.ssl_coupling, self.ssl_offset].iter().all(|v| v.is_finite()) {
            return bad("effect_size, ssl_coupling and ssl_offset must be finite".into());
        }
        Ok(())
    }

    /// The default schema when `F = 27`, otherwise a generic one.
    pub fn schema(&self) -> Result<InformedFeatureSchema> {
        if self.f == InformedFeatureSchema::default_schema().len() {
            Ok(InformedFeatureSchema::default_schema())
        } else {
            InformedFeatureSchema::generic(self.f)
        }
    }
}

/// One generated utterance, with relative file names.
#[derive(Clone, Debug)]
pub struct SyntheticUtterance {
    pub record: UtteranceRecord,
    pub ssl: Matrix,
    pub inf: Vec<f64>,
    pub alignment: Vec<Interval>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn alignment(rng: &mut ChaCha8Rng, frames: usize) -> Vec<Interval> {
    let duration = frames as f64 * FRAME_HOP_S;
    let mut out = Vec::new();
    let words = 3.min(frames);
    let mut bounds: Vec<usize> = (0..=words).map(|w| w * frames / words).collect();
    bounds.dedup();
    for (w, pair) in bounds.windows(2).enumerate() {
        out.push(Interval {
            unit: Unit::Word,
            label: format!("w{w}"),
            start_s: pair[0] as f64 * FRAME_HOP_S,
            end_s: if pair[1] == frames { duration } else { pair[1] as f64 * FRAME_HOP_S },
            emphasized: w == 1,
        });
    }
    let mut start = 0;
    while start < frames {
        let len = rng.gen_range(3..=8).min(frames - start);
        let end = start + len;
        out.push(Interval {
            unit: Unit::Phoneme,
            label: PHONES[rng.gen_range(0..PHONES.len())].to_string(),
            start_s: start as f64 * FRAME_HOP_S,
            end_s: if end == frames { duration } else { end as f64 * FRAME_HOP_S },
            emphasized: false,
        });
        start = end;
    }
    out
}

/// Generates the corpus in memory. Paths in the records are relative to
/// the corpus directory.
pub fn synthesize(cfg: &SyntheticConfig) -> Result<Vec<SyntheticUtterance>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut align_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    align_rng.set_stream(2);
    let basis = Matrix::from_fn(BASIS, cfg.d, |_, _| normal(&mut rng));
    let offset: Vec<f64> = (0..cfg.d).map(|_| cfg.ssl_offset * normal(&mut rng)).collect();
    let mut out = Vec::new();
    for s in 0..cfg.n_speakers {
        let label = if s % 2 == 0 { Label::Hc } else { Label::Pd };
        let dataset = (s / 2) % cfg.n_datasets;
        let speaker = format!("spk{s:03}");
        let mut base: Vec<f64> = (0..cfg.f).map(|_| normal(&mut rng)).collect();
        let coupling = if label == Label::Pd {
            base[cfg.planted_feature] += cfg.effect_size;
            cfg.ssl_coupling * cfg.effect_size
        } else {
            0.0
        };
        for u in 0..cfg.utterances_per_speaker {
            let id = format!("{speaker}_u{u:02}");
            let inf: Vec<f64> = if cfg.utterances_per_speaker == 1 {
                base.clone()
            } else {
                base.iter().map(|v| v + 0.1 * normal(&mut rng)).collect()
            };
            let mut ssl = Matrix::zeros(cfg.frames, cfg.d);
            for t in 0..cfg.frames {
                let mut c: Vec<f64> = (0..BASIS).map(|_| normal(&mut rng)).collect();
                c[0] += coupling * inf[cfg.planted_feature];
                let row = ssl.row_mut(t);
                for (j, v) in row.iter_mut().enumerate() {
                    *v = (0..BASIS).map(|k| c[k] * basis.get(k, j)).sum::<f64>() / (BASIS as f64).sqrt()
                        + offset[j]
                        + 0.5 * normal(&mut rng);
                }
            }
            let record = UtteranceRecord {
                utterance_id: id.clone(),
                speaker_id: speaker.clone(),
                dataset_id: format!("synth{dataset}"),
                task: cfg.task,
                label,
                ssl_path: PathBuf::from(format!("ssl/{id}.sfm1")),
                inf_path: PathBuf::from(format!("inf/{id}.sfm1")),
                alignment_path: Some(PathBuf::from(format!("align/{id}.json"))),
            };
            out.push(SyntheticUtterance {
                record,
                ssl,
                inf,
                alignment: alignment(&mut align_rng, cfg.frames),
            });
        }
    }
    Ok(out)
}

/// In-memory dataset items (paths left relative).
pub fn synthetic_items(cfg: &SyntheticConfig) -> Result<Vec<Item>> {
    Ok(synthesize(cfg)?
        .into_iter()
        .map(|u| Item {
            record: u.record,
            ssl: u.ssl,
            inf: u.inf,
        })
        .collect())
}

#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub manifest_path: PathBuf,
    pub schema_path: PathBuf,
    pub records: Vec<UtteranceRecord>,
}

/// Writes the corpus: `manifest.jsonl`, `schema.json`, `synth.json`, and
/// `ssl/`, `inf/`, `align/` files. Output bytes depend only on `cfg`.
pub fn generate_synthetic(cfg: &SyntheticConfig, out_dir: &Path) -> Result<SyntheticCorpus> {
    let utterances = synthesize(cfg)?;
    let schema = cfg.schema()?;
    let hash = schema.hash();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    for u in &utterances {
        let id = &u.record.utterance_id;
        let mut meta = Map::new();
        meta.insert("utterance_id".into(), Value::String(id.clone()));
        meta.insert("source".into(), Value::String("synthetic".into()));
        write_sfm1(out_dir.join(&u.record.ssl_path), &u.ssl, &meta, Dtype::F32)?;
        meta.insert("schema_hash".into(), Value::String(hash.clone()));
        write_sfm1(out_dir.join(&u.record.inf_path), &Matrix::row_vector(u.inf.clone()), &meta, Dtype::F64)?;
        let align_path = out_dir.join(u.record.alignment_path.as_ref().expect("synthetic alignment"));
        if let Some(parent) = align_path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let text = serde_json::to_string_pretty(&u.alignment)?;
        std::fs::write(&align_path, text).map_err(|e| Error::io(&align_path, e))?;
    }
    let relative: Vec<UtteranceRecord> = utterances.iter().map(|u| u.record.clone()).collect();
    let manifest_path = out_dir.join("manifest.jsonl");
    write_manifest(&manifest_path, &relative)?;
    let schema_path = out_dir.join("schema.json");
    std::fs::write(&schema_path, schema.to_json()).map_err(|e| Error::io(&schema_path, e))?;
    let cfg_path = out_dir.join("synth.json");
    std::fs::write(&cfg_path, serde_json::to_string_pretty(cfg)?).map_err(|e| Error::io(&cfg_path, e))?;
    let records = relative
        .into_iter()
        .map(|mut r| {
            r.ssl_path = out_dir.join(&r.ssl_path);
            r.inf_path = out_dir.join(&r.inf_path);
            r.alignment_path = r.alignment_path.map(|p| out_dir.join(p));
            r
        })
        .collect();
    Ok(SyntheticCorpus {
        manifest_path,
        schema_path,
        records,
    })
}
