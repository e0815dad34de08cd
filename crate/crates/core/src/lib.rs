//! Interpretable Parkinson's disease detection from speech.
//!
//! Two single-head cross-attention branches align a sequence of
//! self-supervised speech embeddings (`T×D`) with a static vector of `F`
//! clinically informed features used directly as attention keys. The
//! embedding branch yields a `D×F` score matrix, the temporal branch a
//! `T×F` one; both are kept for post-hoc analysis.
//!
//! Modules:
//! - [`tensor`]: dense matrices and a reverse-mode tape
//! - [`attention`]: cross- and self-attention blocks
//! - [`model`]: the three classifier variants and checkpoints
//! - [`features`]: informed-feature schema, normalisation, audio conditioning and extraction
//! - [`data`]: manifests, SFM1 files, alignments and splits
//! - [`training`]: AdamW, cosine schedule, F1 and the experiment drivers
//! - [`interpret`]: relevance, category aggregation, DTW contrast and the synthetic corpus

pub mod attention;
pub mod data;
pub mod error;
pub mod features;
pub mod interpret;
pub mod model;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
