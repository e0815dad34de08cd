use std::path::Path;

use serde::{Deserialize, Serialize};

use super::loudness::integrated_loudness;
use super::resample::resample;
use crate::error::{Error, Result};

pub const TARGET_RATE: u32 = 16_000;
pub const TARGET_LUFS: f64 = -23.0;
pub const MIN_INPUT_RATE: u32 = 8_000;
pub const MIN_DURATION_S: f64 = 0.1;
const LOUDNESS_TOLERANCE: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionedAudio {
    pub samples: Vec<f64>,
    pub rate: u32,
    /// Loudness after resampling and before gain.
    pub input_lufs: Option<f64>,
    pub output_lufs: Option<f64>,
    pub gain_db: f64,
    /// Set when the signal had no block above the absolute gate and was
    /// returned without gain.
    pub silent: bool,
}

/// Resamples to 16 kHz and applies gain so the integrated loudness is
/// −23 LUFS. Input already at 16 kHz is not resampled.
pub fn condition_audio(samples: &[f64], rate_in: u32) -> Result<ConditionedAudio> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("audio has no samples".into()));
    }
    if rate_in < MIN_INPUT_RATE {
        return Err(Error::InvalidArgument(format!(
            "sample rate {rate_in} Hz is below the minimum {MIN_INPUT_RATE} Hz"
        )));
    }
    let duration = samples.len() as f64 / rate_in as f64;
    if duration < MIN_DURATION_S {
        return Err(Error::InvalidArgument(format!(
            "audio lasts {duration:.3} s, at least {MIN_DURATION_S} s is required"
        )));
    }
    if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: format!("audio sample {i}"),
        });
    }

    let resampled = if rate_in == TARGET_RATE {
        samples.to_vec()
    } else {
        resample(samples, rate_in, TARGET_RATE)
    };
    let Some(input_lufs) = integrated_loudness(&resampled, TARGET_RATE) else {
        log::warn!("audio is silent after gating; loudness normalisation skipped");
        return Ok(ConditionedAudio {
            samples: resampled,
            rate: TARGET_RATE,
            input_lufs: None,
            output_lufs: None,
            gain_db: 0.0,
            silent: true,
        });
    };

    // Gating depends on level, so a single gain step can land slightly
    // off target when blocks sit near the absolute gate.
    let mut gain_db = TARGET_LUFS - input_lufs;
    let mut out = apply_gain(&resampled, gain_db);
    let mut measured = integrated_loudness(&out, TARGET_RATE);
    for _ in 0..8 {
        match measured {
            Some(l) if (l - TARGET_LUFS).abs() > LOUDNESS_TOLERANCE => {
                gain_db += TARGET_LUFS - l;
                out = apply_gain(&resampled, gain_db);
                measured = integrated_loudness(&out, TARGET_RATE);
            }
            _ => break,
        }
    }
    Ok(ConditionedAudio {
        samples: out,
        rate: TARGET_RATE,
        input_lufs: Some(input_lufs),
        output_lufs: measured,
        gain_db,
        silent: false,
    })
}

fn apply_gain(x: &[f64], gain_db: f64) -> Vec<f64> {
    let g = 10f64.powf(gain_db / 20.0);
    x.iter().map(|v| v * g).collect()
}

/// Reads a PCM (8 to 32 bit integer) or float WAV file as mono samples in
/// [-1, 1]; multichannel audio is averaged across channels.
pub fn read_wav(path: impl AsRef<Path>) -> Result<(Vec<f64>, u32)> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Wav(other),
    })?;
    let spec = reader.spec();
    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        hound::SampleFormat::Int => {
            let scale = (1u64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()?
        }
    };
    let ch = spec.channels.max(1) as usize;
    let mono = interleaved
        .chunks(ch)
        .map(|frame| frame.iter().sum::<f64>() / ch as f64)
        .collect();
    Ok((mono, spec.sample_rate))
}

/// Writes mono 32-bit float WAV.
pub fn write_wav(path: impl AsRef<Path>, samples: &[f64], rate: u32) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: rate,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut w = hound::WavWriter::create(path, spec)?;
    for &s in samples {
        w.write_sample(s as f32)?;
    }
    w.finalize()?;
    Ok(())
}
