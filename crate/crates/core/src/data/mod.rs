//! Manifests, the SFM1 matrix format, alignment files and split generation.

pub mod alignment;
pub mod manifest;
pub mod sfm1;
pub mod splits;

pub use alignment::{load_alignment, parse_alignment, validate_intervals, Interval, Unit};
pub use manifest::{
    load_manifest, load_manifest_unchecked, parse_manifest, write_manifest, Label, Task, UtteranceRecord,
};
pub use sfm1::{decode_sfm1, encode_sfm1, read_sfm1, write_sfm1, Dtype, Sfm1};
pub use splits::{make_cross_lingual_splits, make_nested_splits, speaker_labels, InnerFold, OuterFold, SplitPlan};
