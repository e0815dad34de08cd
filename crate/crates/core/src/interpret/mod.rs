//! Post-hoc analyses of attention scores and the synthetic corpus.

pub mod relevance;
pub mod replay;
pub mod report;
pub mod synth;
pub mod temporal;

pub use relevance::{argmax, embedding_relevance, EmbeddingRelevance, ScoredUtterance, UtteranceRelevance};
pub use replay::{best_seed, replay_run, ReplayedUtterance};
pub use report::{
    category_contrast, category_keys, frames_csv, overlay_csv, profile_csv, relevance_csv, summarize, CategoryContrast, InterpretSummary,
};
pub use synth::{generate_synthetic, synthesize, synthetic_items, SyntheticConfig, SyntheticCorpus, SyntheticUtterance};
pub use temporal::{
    aggregate_categories, contrastive_profile, dtw_align, overlay_alignment, Aggregation, ContrastiveProfile,
    DtwAlignment, OverlayRow,
};
