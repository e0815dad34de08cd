use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, ValueEnum};
use parkattn::data::{load_alignment, load_manifest, Label};
use parkattn::features::InformedFeatureSchema;
use parkattn::interpret::{
    aggregate_categories, best_seed, category_contrast, category_keys, contrastive_profile, embedding_relevance, frames_csv,
    overlay_alignment, overlay_csv, profile_csv, relevance_csv, replay_run, summarize, Aggregation, CategoryContrast, ReplayedUtterance,
    ScoredUtterance,
};
use parkattn::tensor::Matrix;
use parkattn::training::{load_dataset, Dataset, RunResult};
use serde::Serialize;

use crate::train::{RunManifestFile, RESULT, RUN_MANIFEST, SCHEMA};
use crate::{usage, CmdResult, Failure};

const FRAME_HOP_S: f64 = 0.02;

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Mode {
    Embedding,
    Temporal,
}

#[derive(Args)]
pub struct InterpretArgs {
    #[arg(long)]
    pub run_dir: PathBuf,
    #[arg(long, value_enum)]
    pub mode: Mode,
    /// Overlay phoneme and word alignments from the manifest (temporal mode).
    #[arg(long)]
    pub alignments: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Seed to analyse; defaults to the best-performing one.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Keep incorrectly predicted test samples.
    #[arg(long)]
    pub all: bool,
    #[arg(long, default_value = "sum")]
    pub aggregation: String,
    /// Manifest to load instead of the one recorded in the run.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Serialize)]
struct Summary<T: Serialize> {
    seed: u64,
    mode: &'static str,
    #[serde(flatten)]
    body: T,
}

fn require(path: PathBuf, what: &str) -> anyhow::Result<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        anyhow::bail!("run directory is incomplete: missing {what} ({})", path.display())
    }
}

fn write(dir: &Path, name: &str, text: &str) -> anyhow::Result<()> {
    let p = dir.join(name);
    std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
}

struct Loaded {
    data: Dataset,
    schema: InformedFeatureSchema,
    result: RunResult,
    seed: u64,
    replayed: Vec<ReplayedUtterance>,
}

fn load(a: &InterpretArgs) -> Result<Loaded, Failure> {
    let rm_path = require(a.run_dir.join(RUN_MANIFEST), "run manifest")?;
    let result_path = require(a.run_dir.join(RESULT), "run result")?;
    let schema_path = require(a.run_dir.join(SCHEMA), "schema")?;
    let rm: RunManifestFile = serde_json::from_str(&std::fs::read_to_string(&rm_path)?)
        .with_context(|| format!("parsing {}", rm_path.display()))?;
    let result: RunResult = serde_json::from_str(&std::fs::read_to_string(&result_path)?)
        .with_context(|| format!("parsing {}", result_path.display()))?;
    let schema = InformedFeatureSchema::load(&schema_path)?;
    let manifest = a.manifest.clone().unwrap_or(rm.manifest_path);
    let records = load_manifest(&manifest).with_context(|| format!("loading {}", manifest.display()))?;
    let data = load_dataset(&records, result.task, &schema)?;
    let seed = match a.seed {
        Some(s) if result.config.seeds.contains(&s) => s,
        Some(s) => return Err(usage(format!("seed {s} is not part of the run (seeds {:?})", result.config.seeds))),
        None => best_seed(&result).ok_or_else(|| anyhow::anyhow!("every seed of the run failed"))?,
    };
    let replayed = replay_run(&data, &a.run_dir, &result, seed)?;
    Ok(Loaded {
        data,
        schema,
        result,
        seed,
        replayed,
    })
}

fn embedding(a: &InterpretArgs, l: &Loaded) -> CmdResult {
    let mut items = Vec::new();
    for u in &l.replayed {
        let scores = u
            .prediction
            .embedding_scores()
            .ok_or_else(|| usage("embedding relevance needs a cross_attn run"))?;
        items.push(ScoredUtterance {
            utterance_id: &l.data.items[u.index].record.utterance_id,
            label: u.label,
            predicted: u.predicted(),
            scores,
        });
    }
    let r = embedding_relevance(&items, !a.all, l.result.task.as_str())?;
    let names: Vec<&str> = l.schema.names().collect();
    let mut groups = String::from("group,feature,category,value\n");
    for (group, v) in [("HC", &r.hc_mean), ("PD", &r.pd_mean)] {
        for ((name, e), x) in names.iter().zip(l.schema.entries()).zip(v.iter()) {
            let _ = writeln!(groups, "{group},{name},{},{x}", e.category.as_str());
        }
    }
    let mut diff = format!("dim,{}\n", names.join(","));
    for d in 0..r.difference.rows() {
        let row: Vec<String> = r.difference.row(d).iter().map(f64::to_string).collect();
        let _ = writeln!(diff, "{d},{}", row.join(","));
    }
    write(&a.out, "embedding_utterances.csv", &relevance_csv(&r, &l.schema)?)?;
    write(&a.out, "embedding_groups.csv", &groups)?;
    write(&a.out, "embedding_difference.csv", &diff)?;
    let summary = Summary {
        seed: l.seed,
        mode: "embedding",
        body: summarize(&r, &l.schema, None),
    };
    write(&a.out, "embedding_summary.json", &serde_json::to_string_pretty(&summary)?)?;
    println!(
        "seed {}: {} HC / {} PD utterances, top PD feature {}",
        l.seed, summary.body.n_hc, summary.body.n_pd, summary.body.top_pd_feature
    );
    Ok(())
}

fn temporal(a: &InterpretArgs, l: &Loaded) -> CmdResult {
    let mode: Aggregation = a.aggregation.parse().map_err(|e: parkattn::Error| usage(e.to_string()))?;
    let mut hc: Vec<(&str, Matrix)> = Vec::new();
    let mut pd: Vec<(usize, &str, Matrix)> = Vec::new();
    for u in &l.replayed {
        if !a.all && !u.is_correct() {
            continue;
        }
        let s = u
            .prediction
            .temporal_scores
            .as_ref()
            .ok_or_else(|| usage("temporal relevance needs a cross_attn run"))?;
        let agg = aggregate_categories(s, &l.schema, mode)?;
        let id = l.data.items[u.index].record.utterance_id.as_str();
        match u.label {
            Label::Hc => hc.push((id, agg)),
            Label::Pd => pd.push((u.index, id, agg)),
        }
    }
    if hc.is_empty() {
        return Err(anyhow::anyhow!(
            "no {}HC test utterances: the temporal reference is undefined",
            if a.all { "" } else { "correctly predicted " }
        )
        .into());
    }
    let hc_runs: Vec<Matrix> = hc.iter().map(|(_, m)| m.clone()).collect();
    let pd_runs: Vec<Matrix> = pd.iter().map(|(_, _, m)| m.clone()).collect();
    let profile = contrastive_profile(&hc_runs, &pd_runs)?;
    let keys = category_keys();
    let frames: Vec<(&str, &str, &Matrix)> = hc
        .iter()
        .map(|(id, m)| (*id, "HC", m))
        .chain(pd.iter().map(|(_, id, m)| (*id, "PD", m)))
        .collect();
    write(&a.out, "temporal_frames.csv", &frames_csv(&frames, &keys)?)?;
    let pd_ids: Vec<&str> = pd.iter().map(|(_, id, _)| *id).collect();
    write(&a.out, "temporal_profile.csv", &profile_csv(&profile, &pd_ids)?)?;
    if a.alignments {
        let mut text = String::new();
        for ((index, id, _), path) in pd.iter().zip(&profile.pd_paths) {
            let Some(file) = &l.data.items[*index].record.alignment_path else {
                log::warn!("{id}: no alignment file in the manifest");
                continue;
            };
            let intervals = load_alignment(file)?;
            let rows = overlay_alignment(path, profile.length, &intervals, FRAME_HOP_S)?;
            let csv = overlay_csv(id, &rows);
            if text.is_empty() {
                text.push_str(&csv);
            } else {
                text.extend(csv.lines().skip(1).map(|l| format!("{l}\n")));
            }
        }
        write(&a.out, "temporal_overlay.csv", &text)?;
    }
    #[derive(Serialize)]
    struct Body {
        task: String,
        correct_only: bool,
        aggregation: String,
        n_hc: usize,
        n_pd: usize,
        reference_length: usize,
        reference_source: (String, usize),
        hc_dispersion: f64,
        category_contrast: Vec<CategoryContrast>,
    }
    let summary = Summary {
        seed: l.seed,
        mode: "temporal",
        body: Body {
            task: l.result.task.as_str().to_string(),
            correct_only: !a.all,
            aggregation: mode.to_string(),
            n_hc: hc.len(),
            n_pd: pd.len(),
            reference_length: profile.length,
            reference_source: profile.reference_source.clone(),
            hc_dispersion: profile.hc_dispersion,
            category_contrast: category_contrast(&profile),
        },
    };
    write(&a.out, "temporal_summary.json", &serde_json::to_string_pretty(&summary)?)?;
    println!(
        "seed {}: reference of {} frames from {} HC runs, {} PD contrasts",
        l.seed,
        profile.length,
        hc.len(),
        pd.len()
    );
    Ok(())
}

pub fn run(a: InterpretArgs) -> CmdResult {
    let loaded = load(&a)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    match a.mode {
        Mode::Embedding => embedding(&a, &loaded),
        Mode::Temporal => temporal(&a, &loaded),
    }
}
