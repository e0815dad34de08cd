use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::metrics::F1Average;
use super::optim::AdamWConfig;
use crate::attention::ScaleMode;
use crate::data::splits::{DEFAULT_INNER_FOLDS, DEFAULT_OUTER_FOLDS};
use crate::error::{Error, Result};

/// Granularity of the cosine learning-rate decay.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    #[default]
    PerStep,
    PerEpoch,
}

impl FromStr for LrSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_step" => Ok(LrSchedule::PerStep),
            "per_epoch" => Ok(LrSchedule::PerEpoch),
            other => Err(Error::InvalidArgument(format!(
                "unknown lr_schedule '{other}', expected per_step|per_epoch"
            ))),
        }
    }
}

impl fmt::Display for LrSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LrSchedule::PerStep => "per_step",
            LrSchedule::PerEpoch => "per_epoch",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// One repetition per seed; the seed drives initialisation and
    /// shuffling.
    pub seeds: Vec<u64>,
    pub outer_folds: usize,
    pub inner_folds: usize,
    /// Seed of the speaker split, shared by all repetitions.
    pub split_seed: u64,
    pub scale: ScaleMode,
    pub normalize_informed: bool,
    pub normalize_ssl: bool,
    pub lr_schedule: LrSchedule,
    pub f1_average: F1Average,
    /// Train on the first inner split and report validation F1 before the
    /// outer-train refit.
    pub validate: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 4e-4,
            epochs: 5,
            batch_size: 8,
            weight_decay: 0.01,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seeds: vec![0, 1, 2, 3, 4],
            outer_folds: DEFAULT_OUTER_FOLDS,
            inner_folds: DEFAULT_INNER_FOLDS,
            split_seed: 0,
            scale: ScaleMode::Contracted,
            normalize_informed: true,
            normalize_ssl: false,
            lr_schedule: LrSchedule::PerStep,
            f1_average: F1Average::Macro,
            validate: true,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("invalid value '{value}' for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::InvalidArgument(format!("invalid boolean '{value}' for {key}"))),
    }
}

impl TrainConfig {
    pub const KEYS: [&'static str; 17] = [
        "learning_rate",
        "epochs",
        "batch_size",
        "weight_decay",
        "adam_beta1",
        "adam_beta2",
        "adam_eps",
        "seeds",
        "outer_folds",
        "inner_folds",
        "split_seed",
        "scale",
        "normalize_informed",
        "normalize_ssl",
        "lr_schedule",
        "f1_average",
        "validate",
    ];

    pub fn adamw(&self) -> AdamWConfig {
        AdamWConfig {
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
            weight_decay: self.weight_decay,
        }
    }

    pub fn validate_values(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("adam betas must lie in [0, 1)");
        }
        if self.adam_eps <= 0.0 || self.weight_decay < 0.0 {
            return bad("adam_eps must be positive and weight_decay non-negative");
        }
        Ok(())
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "weight_decay" => self.weight_decay = parse(key, value)?,
            "adam_beta1" => self.adam_beta1 = parse(key, value)?,
            "adam_beta2" => self.adam_beta2 = parse(key, value)?,
            "adam_eps" => self.adam_eps = parse(key, value)?,
            "seeds" => {
                self.seeds = value
                    .split(',')
                    .map(|s| parse(key, s.trim()))
                    .collect::<Result<_>>()?
            }
            "outer_folds" => self.outer_folds = parse(key, value)?,
            "inner_folds" => self.inner_folds = parse(key, value)?,
            "split_seed" => self.split_seed = parse(key, value)?,
            "scale" => self.scale = value.parse()?,
            "normalize_informed" => self.normalize_informed = parse_bool(key, value)?,
            "normalize_ssl" => self.normalize_ssl = parse_bool(key, value)?,
            "lr_schedule" => self.lr_schedule = value.parse()?,
            "f1_average" => self.f1_average = value.parse()?,
            "validate" => self.validate = parse_bool(key, value)?,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown config key '{other}', expected one of {}",
                    Self::KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse_kv(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_kv(text)?;
        Ok(cfg)
    }

    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::InvalidArgument(format!("config line {}: expected key = value, got '{raw}'", n + 1))
            })?;
            self.set(k.trim(), v).map_err(|e| match e {
                Error::InvalidArgument(m) => Error::InvalidArgument(format!("config line {}: {m}", n + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    /// Fully resolved `key = value` rendering, one key per line.
    pub fn to_kv(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let values = [
            format!("{:e}", self.learning_rate),
            self.epochs.to_string(),
            self.batch_size.to_string(),
            self.weight_decay.to_string(),
            self.adam_beta1.to_string(),
            self.adam_beta2.to_string(),
            format!("{:e}", self.adam_eps),
            seeds.join(","),
            self.outer_folds.to_string(),
            self.inner_folds.to_string(),
            self.split_seed.to_string(),
            self.scale.to_string(),
            self.normalize_informed.to_string(),
            self.normalize_ssl.to_string(),
            self.lr_schedule.to_string(),
            self.f1_average.to_string(),
            self.validate.to_string(),
        ];
        Self::KEYS
            .iter()
            .zip(values)
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}
