//! Nested cross-validation and leave-one-dataset-out drivers.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{LrSchedule, TrainConfig};
use super::dataset::Dataset;
use super::metrics::{f1_score, mean_std};
use super::optim::{adamw_step, cosine_lr, AdamState};
use crate::data::{make_cross_lingual_splits, make_nested_splits, Label, UtteranceRecord};
use crate::error::{Error, Result};
use crate::features::normalize::{fit_column_reference, fit_reference, FeatureRow, NormalizationReference};
use crate::features::InformedFeatureSchema;
use crate::model::{write_checkpoint, ModelParams, Prediction, Sample, Variant};
use crate::tensor::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    NestedCv,
    CrossLingual,
}

/// One (fold, seed) training job over dataset indices.
#[derive(Clone, Debug)]
pub struct JobSpec {
    /// Outer fold number, or the held-out dataset id.
    pub fold: String,
    pub seed: u64,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Inner (train, validation) indices used for the validation score.
    pub validation: Option<(Vec<usize>, Vec<usize>)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtterancePrediction {
    pub fold: String,
    pub seed: u64,
    pub utterance_id: String,
    pub speaker_id: String,
    pub dataset_id: String,
    pub label: usize,
    pub predicted: usize,
    pub logit_hc: f64,
    pub logit_pd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldSeedResult {
    pub fold: String,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    /// HC rows the normalisation reference was fitted on.
    pub n_reference_rows: usize,
    pub validation_f1: Option<f64>,
    pub test_f1: Option<f64>,
    /// Mean training loss per epoch of the outer-train fit.
    pub epoch_losses: Vec<f64>,
    /// `None` on success, otherwise the reason the run was aborted.
    pub failure: Option<String>,
    /// Relative to the run directory.
    pub checkpoint: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub protocol: Protocol,
    pub task: crate::data::Task,
    pub variant: Variant,
    pub schema_hash: String,
    pub d: usize,
    pub f: usize,
    pub config: TrainConfig,
    pub runs: Vec<FoldSeedResult>,
    pub test_f1_mean: f64,
    pub test_f1_std: f64,
    pub validation_f1_mean: Option<f64>,
    pub validation_f1_std: Option<f64>,
    pub failures: usize,
    pub predictions: Vec<UtterancePrediction>,
}

impl RunResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run result serialises")
    }

    /// Flat CSV of the per-utterance predictions.
    pub fn predictions_csv(&self) -> String {
        let mut out = String::from("fold,seed,utterance_id,speaker_id,dataset_id,label,predicted,logit_hc,logit_pd\n");
        for p in &self.predictions {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                p.fold, p.seed, p.utterance_id, p.speaker_id, p.dataset_id, p.label, p.predicted, p.logit_hc, p.logit_pd
            ));
        }
        out
    }
}

/// A trained model together with the preprocessing fitted alongside it.
#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub params: ModelParams,
    pub informed_reference: NormalizationReference,
    pub ssl_reference: Option<NormalizationReference>,
    pub normalize_informed: bool,
    pub epoch_losses: Vec<f64>,
}

impl TrainedModel {
    /// Applies the fitted normalisation to one item's inputs.
    pub fn prepare(&self, ssl: &Matrix, inf: &[f64], schema_hash: &str) -> Result<(Matrix, Matrix)> {
        let inf = if self.normalize_informed {
            self.informed_reference.normalize(inf, schema_hash)?
        } else {
            inf.to_vec()
        };
        let ssl = match &self.ssl_reference {
            Some(r) => r.normalize_rows(ssl, &r.schema_hash)?,
            None => ssl.clone(),
        };
        Ok((ssl, Matrix::row_vector(inf)))
    }

    pub fn predict(&self, data: &Dataset, idx: usize) -> Result<Prediction> {
        let item = &data.items[idx];
        let (ssl, inf) = self.prepare(&item.ssl, &item.inf, &data.schema_hash)?;
        self.params.forward(Sample { ssl: &ssl, inf: &inf })
    }
}

fn label_of(data: &Dataset, i: usize) -> usize {
    data.items[i].record.label.index()
}

/// Fits normalisation on the HC rows of `train` and trains a fresh model
/// for `cfg.epochs` epochs with the given seed. `tag` prefixes log lines.
#[allow(clippy::too_many_arguments)]
pub fn fit_model(
    data: &Dataset,
    train: &[usize],
    variant: Variant,
    schema: &InformedFeatureSchema,
    cfg: &TrainConfig,
    seed: u64,
    tag: &str,
    log: &mut Vec<String>,
) -> Result<TrainedModel> {
    if train.is_empty() {
        return Err(Error::InsufficientData("empty training partition".into()));
    }
    let rows: Vec<FeatureRow<'_>> = train
        .iter()
        .map(|&i| FeatureRow {
            id: &data.items[i].record.utterance_id,
            values: &data.items[i].inf,
            label: data.items[i].record.label,
        })
        .collect();
    let fitted_on = format!("{tag} seed={seed}");
    let informed_reference = fit_reference(&rows, schema, &fitted_on)?;
    let ssl_reference = if cfg.normalize_ssl {
        let hc: Vec<(&str, &Matrix)> = train
            .iter()
            .filter(|&&i| data.items[i].record.label == Label::Hc)
            .map(|&i| (data.items[i].record.utterance_id.as_str(), &data.items[i].ssl))
            .collect();
        Some(fit_column_reference(&hc, &fitted_on)?)
    } else {
        None
    };
    let mut model = TrainedModel {
        params: ModelParams::init(variant, data.d, data.f, seed)?.with_scale(cfg.scale),
        informed_reference,
        ssl_reference,
        normalize_informed: cfg.normalize_informed,
        epoch_losses: Vec::new(),
    };
    let inputs: Vec<(Matrix, Matrix)> = train
        .iter()
        .map(|&i| model.prepare(&data.items[i].ssl, &data.items[i].inf, &data.schema_hash))
        .collect::<Result<_>>()?;

    let names = model.params.names();
    let adam = cfg.adamw();
    let mut state = AdamState::new(&model.params.tensors());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let steps_per_epoch = train.len().div_ceil(cfg.batch_size);
    let total_steps = cfg.epochs * steps_per_epoch;
    let mut step = 0;
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut lr = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut acc: Option<Vec<Matrix>> = None;
            for &k in batch {
                let (ssl, inf) = &inputs[k];
                let (loss, grads, _) = model
                    .params
                    .loss_and_grads(Sample { ssl, inf }, label_of(data, train[k]))?;
                if !loss.is_finite() {
                    return Err(Error::Diverged(format!("non-finite loss at epoch {}", epoch + 1)));
                }
                loss_sum += loss;
                match acc.as_mut() {
                    None => acc = Some(grads),
                    Some(a) => {
                        for (x, g) in a.iter_mut().zip(&grads) {
                            x.add_assign(g)?;
                        }
                    }
                }
            }
            let inv = 1.0 / batch.len() as f64;
            let grads: Vec<Matrix> = acc.expect("nonempty batch").into_iter().map(|g| g.scale(inv)).collect();
            lr = match cfg.lr_schedule {
                LrSchedule::PerStep => cosine_lr(step, total_steps, cfg.learning_rate),
                LrSchedule::PerEpoch => cosine_lr(epoch, cfg.epochs, cfg.learning_rate),
            };
            adamw_step(&mut model.params.tensors_mut(), &grads, &names, &mut state, lr, &adam).map_err(|e| match e {
                Error::NonFinite { context } => Error::Diverged(context),
                other => other,
            })?;
            step += 1;
        }
        if !model.params.is_finite() {
            return Err(Error::Diverged(format!("non-finite parameters after epoch {}", epoch + 1)));
        }
        let mean_loss = loss_sum / train.len() as f64;
        let line = format!(
            "EPOCH {tag} seed={seed} epoch={}/{} loss={mean_loss:.6} lr={lr:.6e}",
            epoch + 1,
            cfg.epochs
        );
        log::info!("{line}");
        log.push(line);
        model.epoch_losses.push(mean_loss);
    }
    Ok(model)
}

fn evaluate(model: &TrainedModel, data: &Dataset, idx: &[usize], cfg: &TrainConfig) -> Result<(f64, Vec<(usize, Prediction)>)> {
    let preds: Vec<(usize, Prediction)> = idx
        .iter()
        .map(|&i| model.predict(data, i).map(|p| (i, p)))
        .collect::<Result<_>>()?;
    let pairs: Vec<(usize, usize)> = preds.iter().map(|(i, p)| (p.predicted_label, label_of(data, *i))).collect();
    Ok((f1_score(&pairs, cfg.f1_average), preds))
}

fn speakers(data: &Dataset, idx: &[usize]) -> BTreeSet<String> {
    idx.iter().map(|&i| data.items[i].record.speaker_id.clone()).collect()
}

/// Checks that no test speaker contributed to training or normalisation.
fn check_provenance(data: &Dataset, job: &JobSpec, reference: &NormalizationReference) -> Result<()> {
    let test_speakers = speakers(data, &job.test);
    if !speakers(data, &job.train).is_disjoint(&test_speakers) {
        return Err(Error::InvalidArgument(format!("fold {}: a test speaker is in the training set", job.fold)));
    }
    for id in &reference.source_ids {
        let i = data
            .index_of(id)
            .ok_or_else(|| Error::InvalidArgument(format!("normalisation row '{id}' is not in the dataset")))?;
        let r = &data.items[i].record;
        if r.label != Label::Hc || test_speakers.contains(&r.speaker_id) {
            return Err(Error::InvalidArgument(format!(
                "fold {}: normalisation reference used row '{id}' outside the HC training partition",
                job.fold
            )));
        }
    }
    Ok(())
}

fn job_dir(job: &JobSpec) -> String {
    job_dir_name(&job.fold, job.seed)
}

/// Directory of one (fold, seed) job, relative to the run directory.
pub fn job_dir_name(fold: &str, seed: u64) -> String {
    format!("runs/fold-{fold}_seed-{seed}")
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::MissingFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    Ok(serde_json::from_str(&text)?)
}

/// Reloads the model and normalisation written for one job.
pub fn load_trained(run_dir: &Path, fold: &str, seed: u64, cfg: &TrainConfig) -> Result<TrainedModel> {
    let dir = run_dir.join(job_dir_name(fold, seed));
    let ckpt = dir.join("model.pkck");
    if !ckpt.is_file() {
        return Err(Error::MissingFile {
            path: ckpt,
            reason: "checkpoint not found".into(),
        });
    }
    let (_, params) = crate::model::read_checkpoint(&ckpt)?;
    let informed_reference = read_json(&dir.join("norm_informed.json"))?;
    let ssl_reference = if cfg.normalize_ssl {
        Some(read_json(&dir.join("norm_ssl.json"))?)
    } else {
        None
    };
    Ok(TrainedModel {
        params,
        informed_reference,
        ssl_reference,
        normalize_informed: cfg.normalize_informed,
        epoch_losses: Vec::new(),
    })
}

struct JobOutcome {
    result: FoldSeedResult,
    predictions: Vec<UtterancePrediction>,
}

fn run_job(
    data: &Dataset,
    job: &JobSpec,
    variant: Variant,
    schema: &InformedFeatureSchema,
    cfg: &TrainConfig,
    out_dir: Option<&Path>,
) -> Result<JobOutcome> {
    let mut log = Vec::new();
    let mut result = FoldSeedResult {
        fold: job.fold.clone(),
        seed: job.seed,
        n_train: job.train.len(),
        n_test: job.test.len(),
        n_reference_rows: 0,
        validation_f1: None,
        test_f1: None,
        epoch_losses: Vec::new(),
        failure: None,
        checkpoint: None,
    };
    let outcome = (|| -> Result<Vec<UtterancePrediction>> {
        if let Some((inner_train, validation)) = &job.validation {
            let tag = format!("fold={} stage=validation", job.fold);
            let model = fit_model(data, inner_train, variant, schema, cfg, job.seed, &tag, &mut log)?;
            result.validation_f1 = Some(evaluate(&model, data, validation, cfg)?.0);
        }
        let tag = format!("fold={} stage=test", job.fold);
        let model = fit_model(data, &job.train, variant, schema, cfg, job.seed, &tag, &mut log)?;
        check_provenance(data, job, &model.informed_reference)?;
        result.n_reference_rows = model.informed_reference.source_ids.len();
        result.epoch_losses = model.epoch_losses.clone();
        let (f1, preds) = evaluate(&model, data, &job.test, cfg)?;
        result.test_f1 = Some(f1);
        if let Some(dir) = out_dir {
            let rel = job_dir(job);
            let abs = dir.join(&rel);
            write_checkpoint(abs.join("model.pkck"), &model.params, &data.schema_hash)?;
            write_json(&abs.join("norm_informed.json"), &model.informed_reference)?;
            if let Some(r) = &model.ssl_reference {
                write_json(&abs.join("norm_ssl.json"), r)?;
            }
            result.checkpoint = Some(format!("{rel}/model.pkck"));
        }
        Ok(preds
            .into_iter()
            .map(|(i, p)| {
                let r = &data.items[i].record;
                UtterancePrediction {
                    fold: job.fold.clone(),
                    seed: job.seed,
                    utterance_id: r.utterance_id.clone(),
                    speaker_id: r.speaker_id.clone(),
                    dataset_id: r.dataset_id.clone(),
                    label: r.label.index(),
                    predicted: p.predicted_label,
                    logit_hc: p.logits[0],
                    logit_pd: p.logits[1],
                }
            })
            .collect())
    })();
    let predictions = match outcome {
        Ok(p) => p,
        Err(Error::Diverged(reason)) => {
            log::warn!("fold {} seed {} diverged: {reason}", job.fold, job.seed);
            result.failure = Some(format!("diverged: {reason}"));
            result.validation_f1 = None;
            result.test_f1 = None;
            Vec::new()
        }
        Err(e) => return Err(e),
    };
    if let Some(dir) = out_dir {
        let path = dir.join(job_dir(job)).join("epochs.log");
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let text: String = log.iter().map(|l| format!("{l}\n")).collect();
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(JobOutcome { result, predictions })
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Runs `f` over `items` on up to `jobs` threads; results keep input order.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let jobs = jobs.clamp(1, items.len().max(1));
    if jobs == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("result slots")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("result slots")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

/// Options that affect where and how fast a run executes, not its result.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub jobs: usize,
}

fn execute(
    data: &Dataset,
    specs: Vec<JobSpec>,
    protocol: Protocol,
    variant: Variant,
    schema: &InformedFeatureSchema,
    cfg: &TrainConfig,
    opts: &RunOptions,
) -> Result<RunResult> {
    cfg.validate_values()?;
    if schema.hash() != data.schema_hash {
        return Err(Error::Schema("dataset was loaded with a different schema".into()));
    }
    let outcomes = parallel_map(&specs, opts.jobs.max(1), |job| {
        run_job(data, job, variant, schema, cfg, opts.out_dir.as_deref())
    });
    let mut runs = Vec::with_capacity(specs.len());
    let mut predictions = Vec::new();
    for o in outcomes {
        let o = o?;
        runs.push(o.result);
        predictions.extend(o.predictions);
    }
    let tests: Vec<f64> = runs.iter().filter_map(|r| r.test_f1).collect();
    let vals: Vec<f64> = runs.iter().filter_map(|r| r.validation_f1).collect();
    let (test_f1_mean, test_f1_std) = mean_std(&tests);
    let (validation_f1_mean, validation_f1_std) = if vals.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_std(&vals);
        (Some(m), Some(s))
    };
    Ok(RunResult {
        protocol,
        task: data.task,
        variant,
        schema_hash: data.schema_hash.clone(),
        d: data.d,
        f: data.f,
        config: cfg.clone(),
        failures: runs.iter().filter(|r| r.failure.is_some()).count(),
        runs,
        test_f1_mean,
        test_f1_std,
        validation_f1_mean,
        validation_f1_std,
        predictions,
    })
}

/// Job list of the nested cross-validation protocol: every outer fold
/// crossed with every seed.
pub fn nested_cv_jobs(data: &Dataset, cfg: &TrainConfig) -> Result<Vec<JobSpec>> {
    let records: Vec<UtteranceRecord> = data.items.iter().map(|i| i.record.clone()).collect();
    let plan = make_nested_splits(&records, data.task, cfg.outer_folds, cfg.inner_folds, cfg.split_seed)?;
    let mut specs = Vec::new();
    for (k, fold) in plan.folds.iter().enumerate() {
        let validation = if cfg.validate {
            let inner = &fold.inner[0];
            Some((data.indices_of_speakers(&inner.train), data.indices_of_speakers(&inner.validation)))
        } else {
            None
        };
        for &seed in &cfg.seeds {
            specs.push(JobSpec {
                fold: k.to_string(),
                seed,
                train: data.indices_of_speakers(&fold.train),
                test: data.indices_of_speakers(&fold.test),
                validation: validation.clone(),
            });
        }
    }
    Ok(specs)
}

/// Speaker-independent nested cross-validation for one task.
pub fn train_task(
    data: &Dataset,
    variant: Variant,
    schema: &InformedFeatureSchema,
    cfg: &TrainConfig,
    opts: &RunOptions,
) -> Result<RunResult> {
    let specs = nested_cv_jobs(data, cfg)?;
    execute(data, specs, Protocol::NestedCv, variant, schema, cfg, opts)
}

/// Job list of the leave-one-dataset-out protocol. `held_out` restricts
/// the run to one dataset; otherwise every dataset is held out in turn.
pub fn cross_lingual_jobs(data: &Dataset, cfg: &TrainConfig, held_out: Option<&str>) -> Result<Vec<JobSpec>> {
    let records: Vec<UtteranceRecord> = data.items.iter().map(|i| i.record.clone()).collect();
    let datasets: BTreeSet<String> = records.iter().map(|r| r.dataset_id.clone()).collect();
    let targets: Vec<String> = match held_out {
        Some(d) => vec![d.to_string()],
        None => datasets.into_iter().collect(),
    };
    let mut specs = Vec::new();
    for target in targets {
        let (train, test) = make_cross_lingual_splits(&records, &target)?;
        let idx = |rs: &[UtteranceRecord]| -> Vec<usize> {
            let mut v: Vec<usize> = rs.iter().filter_map(|r| data.index_of(&r.utterance_id)).collect();
            v.sort_unstable();
            v
        };
        let (train, test) = (idx(&train), idx(&test));
        for &seed in &cfg.seeds {
            specs.push(JobSpec {
                fold: target.clone(),
                seed,
                train: train.clone(),
                test: test.clone(),
                validation: None,
            });
        }
    }
    Ok(specs)
}

/// Trains on all datasets but one and tests on the held-out one. The
/// configuration is used as given, without inner validation.
pub fn train_cross_lingual(
    data: &Dataset,
    variant: Variant,
    schema: &InformedFeatureSchema,
    cfg: &TrainConfig,
    held_out: Option<&str>,
    opts: &RunOptions,
) -> Result<RunResult> {
    let specs = cross_lingual_jobs(data, cfg, held_out)?;
    execute(data, specs, Protocol::CrossLingual, variant, schema, cfg, opts)
}
