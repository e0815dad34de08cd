use std::path::{Path, PathBuf};

use anyhow::Context;
use parkattn::data::{load_manifest, Task};
use parkattn::features::InformedFeatureSchema;
use parkattn::model::Variant;
use parkattn::training::{load_dataset, train_cross_lingual, train_task, RunOptions, RunResult, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{usage, CmdResult, CommonTrainArgs, CrossArgs, Failure, TrainArgs};

pub const RUN_MANIFEST: &str = "run_manifest.json";
pub const RESULT: &str = "result.json";
pub const SCHEMA: &str = "schema.json";

/// Everything needed to repeat a run. Written once, before training.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifestFile {
    pub command: String,
    pub tool_version: String,
    pub argv: Vec<String>,
    pub task: Task,
    pub variant: Variant,
    pub manifest_path: PathBuf,
    pub manifest_sha256: String,
    pub schema_source: String,
    pub schema_hash: String,
    pub config: TrainConfig,
    pub seeds: Vec<u64>,
    pub hold_out: Option<String>,
    pub jobs: usize,
    /// Value of `PARKATTN_THREADS`, if set.
    pub threads: Option<usize>,
    pub started_at: String,
}

pub fn parse_task(s: &str) -> Result<Task, Failure> {
    s.to_ascii_uppercase().parse().map_err(|e: parkattn::Error| usage(e.to_string()))
}

/// `--schema`, else `schema.json` next to the manifest, else the built-in schema.
pub fn resolve_schema(explicit: Option<&Path>, manifest: &Path) -> anyhow::Result<(InformedFeatureSchema, String)> {
    if let Some(p) = explicit {
        let s = InformedFeatureSchema::load(p).with_context(|| format!("loading schema {}", p.display()))?;
        return Ok((s, p.display().to_string()));
    }
    let sibling = manifest.parent().unwrap_or(Path::new(".")).join(SCHEMA);
    if sibling.is_file() {
        let s = InformedFeatureSchema::load(&sibling)?;
        return Ok((s, sibling.display().to_string()));
    }
    Ok((InformedFeatureSchema::default_schema(), "builtin".into()))
}

fn threads_env() -> Result<Option<usize>, Failure> {
    match std::env::var("PARKATTN_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(usage(format!("PARKATTN_THREADS must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(None),
    }
}

fn resolve_config(a: &CommonTrainArgs, folds: Option<(Option<usize>, Option<usize>)>) -> Result<TrainConfig, Failure> {
    let mut cfg = TrainConfig::default();
    let bad = |e: parkattn::Error| usage(e.to_string());
    if let Some(path) = &a.config {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        cfg.apply_kv(&text).map_err(bad)?;
    }
    if let Some(s) = &a.seeds {
        cfg.set("seeds", s).map_err(bad)?;
    }
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = a.batch_size {
        cfg.batch_size = v;
    }
    if let Some((outer, inner)) = folds {
        if let Some(v) = outer {
            cfg.outer_folds = v;
        }
        if let Some(v) = inner {
            cfg.inner_folds = v;
        }
    }
    for kv in &a.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| usage(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg.set(k.trim(), v).map_err(bad)?;
    }
    cfg.validate_values().map_err(bad)?;
    Ok(cfg)
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run_common(command: &str, a: &CommonTrainArgs, cfg: TrainConfig, hold_out: Option<String>) -> CmdResult {
    let task = parse_task(&a.task)?;
    let variant: Variant = a.model.parse().map_err(|e: parkattn::Error| usage(e.to_string()))?;
    let threads = threads_env()?;
    let jobs = threads.map_or(a.jobs, |t| a.jobs.min(t)).max(1);
    let manifest_bytes = std::fs::read(&a.manifest).with_context(|| format!("reading {}", a.manifest.display()))?;
    let records = load_manifest(&a.manifest)?;
    let (schema, schema_source) = resolve_schema(a.schema.as_deref(), &a.manifest)?;
    let data = load_dataset(&records, task, &schema)?;
    if let Some(h) = &hold_out {
        if !data.items.iter().any(|i| &i.record.dataset_id == h) {
            let mut ids: Vec<&str> = data.items.iter().map(|i| i.record.dataset_id.as_str()).collect();
            ids.sort_unstable();
            ids.dedup();
            return Err(usage(format!("unknown dataset '{h}', available: {}", ids.join(", "))));
        }
    }

    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let manifest = RunManifestFile {
        command: command.into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        argv: std::env::args().collect(),
        task,
        variant,
        manifest_path: std::fs::canonicalize(&a.manifest)?,
        manifest_sha256: hex::encode(Sha256::digest(&manifest_bytes)),
        schema_source,
        schema_hash: schema.hash(),
        seeds: cfg.seeds.clone(),
        config: cfg.clone(),
        hold_out: hold_out.clone(),
        jobs,
        threads,
        started_at: chrono::Utc::now().to_rfc3339(),
    };
    write(&a.out_dir.join(RUN_MANIFEST), &serde_json::to_string_pretty(&manifest)?)?;
    write(&a.out_dir.join(SCHEMA), &schema.to_json())?;
    write(&a.out_dir.join("config.kv"), &cfg.to_kv())?;

    log::info!(
        "{command}: task {task}, {} utterances, variant {}, {} seed(s)",
        data.items.len(),
        variant.as_str(),
        cfg.seeds.len()
    );
    let opts = RunOptions {
        out_dir: Some(a.out_dir.clone()),
        jobs,
    };
    let result = if command == "crosslingual" {
        train_cross_lingual(&data, variant, &schema, &cfg, hold_out.as_deref(), &opts)?
    } else {
        train_task(&data, variant, &schema, &cfg, &opts)?
    };
    write_result(&a.out_dir, &result)?;
    println!(
        "test F1 {:.2} ± {:.2} over {} runs ({} failed)",
        result.test_f1_mean,
        result.test_f1_std,
        result.runs.len(),
        result.failures
    );
    if result.failures == result.runs.len() {
        return Err(anyhow::anyhow!("every run diverged").into());
    }
    Ok(())
}

fn write_result(dir: &Path, result: &RunResult) -> anyhow::Result<()> {
    write(&dir.join(RESULT), &result.to_json())?;
    write(&dir.join("predictions.csv"), &result.predictions_csv())
}

pub fn run_train(a: TrainArgs) -> CmdResult {
    let cfg = resolve_config(&a.common, Some((a.outer_folds, a.inner_folds)))?;
    run_common("train", &a.common, cfg, None)
}

pub fn run_crosslingual(a: CrossArgs) -> CmdResult {
    let cfg = resolve_config(&a.common, None)?;
    run_common("crosslingual", &a.common, cfg, a.hold_out.clone())
}
