//! Informed-feature schema, HC-referenced normalisation, audio
//! conditioning and the acoustic feature extractor.

pub mod audio;
pub mod contours;
pub mod informed;
pub mod loudness;
pub mod lpc;
pub mod normalize;
pub mod resample;
pub mod schema;

pub use audio::{condition_audio, read_wav, write_wav, ConditionedAudio, TARGET_LUFS, TARGET_RATE};
pub use contours::{extract_contours, AcousticContours, ContourConfig};
pub use informed::{assemble_informed_vector, computed_features};
pub use loudness::{integrated_loudness, KWeighting};
pub use normalize::{fit_column_reference, fit_reference, FeatureRow, NormalizationReference, STD_EPSILON};
pub use resample::resample;
pub use schema::{Category, InformedFeatureSchema, SchemaEntry, Source};
