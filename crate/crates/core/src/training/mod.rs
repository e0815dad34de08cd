//! Optimisation, evaluation and the experiment drivers.

pub mod config;
pub mod dataset;
pub mod metrics;
pub mod optim;
pub mod run;

pub use config::{LrSchedule, TrainConfig};
pub use dataset::{load_dataset, Dataset, Item};
pub use metrics::{f1_score, mean_std, F1Average};
pub use optim::{adamw_step, cosine_lr, AdamState, AdamWConfig};
pub use run::{
    cross_lingual_jobs, fit_model, job_dir_name, load_trained, nested_cv_jobs, parallel_map, train_cross_lingual, train_task, FoldSeedResult,
    JobSpec, Protocol, RunOptions, RunResult, TrainedModel, UtterancePrediction,
};
