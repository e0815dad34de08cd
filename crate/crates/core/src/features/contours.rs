//! Frame-level acoustic contours: F0, energy, voicing, pauses, formants
//! and cycle-level pitch marks.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::lpc::{frame_formants, FormantLimits};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContourConfig {
    pub window_s: f64,
    pub hop_s: f64,
    pub f0_min: f64,
    pub f0_max: f64,
    /// Minimum normalised autocorrelation peak for a voiced frame.
    pub voicing_threshold: f64,
    /// Frames more than this many dB below the loudest frame are inactive.
    pub dynamic_range_db: f64,
    /// Absolute activity floor in dB relative to full scale.
    pub floor_db: f64,
    pub min_voiced_s: f64,
    pub min_pause_s: f64,
    pub lpc_order: usize,
    pub f1_range: (f64, f64),
    pub f2_range: (f64, f64),
    pub max_formant_bandwidth: f64,
}

impl Default for ContourConfig {
    fn default() -> Self {
        Self {
            window_s: 0.025,
            hop_s: 0.010,
            f0_min: 50.0,
            f0_max: 500.0,
            voicing_threshold: 0.45,
            dynamic_range_db: 40.0,
            floor_db: -70.0,
            min_voiced_s: 0.030,
            min_pause_s: 0.050,
            lpc_order: 12,
            f1_range: (200.0, 1200.0),
            f2_range: (600.0, 3500.0),
            max_formant_bandwidth: 400.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcousticContours {
    pub rate: u32,
    pub duration_s: f64,
    pub hop_s: f64,
    /// Frame centre of frame 0 in seconds.
    pub first_center_s: f64,
    /// Hz per frame, 0 when unvoiced.
    pub f0: Vec<f64>,
    /// Log-energy per frame in dB (mean square over the analysis window).
    pub energy: Vec<f64>,
    /// Speech activity per frame.
    pub active: Vec<bool>,
    pub voiced_segments: Vec<(f64, f64)>,
    pub pauses: Vec<(f64, f64)>,
    /// `(F1, F2)` in Hz for each voiced frame where both were found.
    pub formants: Vec<(f64, f64)>,
    /// Pitch-period durations in seconds, one list per voiced segment.
    pub periods: Vec<Vec<f64>>,
    /// Peak amplitude of each cycle, aligned with `periods`.
    pub amplitudes: Vec<Vec<f64>>,
}

impl AcousticContours {
    pub fn n_frames(&self) -> usize {
        self.f0.len()
    }

    pub fn frame_time(&self, i: usize) -> f64 {
        self.first_center_s + i as f64 * self.hop_s
    }
}

fn db(mean_square: f64) -> f64 {
    10.0 * (mean_square + 1e-12).log10()
}

/// Best pitch lag of the frame starting at `start` by normalised
/// cross-correlation of the window with its lagged copy. Near the end of
/// the signal the lagged copy may be cut short, down to half a window.
/// Returns the refined lag and the peak strength.
fn pitch_lag(x: &[f64], start: usize, n: usize, lag_min: usize, lag_max: usize) -> Option<(f64, f64)> {
    let lag_max = lag_max.min(x.len().saturating_sub(start + n / 2));
    if lag_max < lag_min + 2 {
        return None;
    }
    let frame = &x[start..start + n];
    let mean = frame.iter().sum::<f64>() / n as f64;
    if frame.iter().all(|&v| v == mean) {
        return None;
    }
    let r: Vec<f64> = (lag_min - 1..=lag_max)
        .map(|lag| {
            let m = n.min(x.len() - start - lag);
            let lagged = &x[start + lag..start + lag + m];
            let (mut cross, mut e0, mut el) = (0.0, 0.0, 0.0);
            for (a, b) in frame[..m].iter().zip(lagged) {
                cross += (a - mean) * (b - mean);
                e0 += (a - mean) * (a - mean);
                el += (b - mean) * (b - mean);
            }
            if el <= 0.0 || e0 <= 0.0 {
                0.0
            } else {
                cross / (e0 * el).sqrt()
            }
        })
        .collect();
    // r[i] holds lag `lag_min - 1 + i`.
    let peaks: Vec<usize> = (1..r.len() - 1)
        .filter(|&i| r[i] >= r[i - 1] && r[i] >= r[i + 1] && r[i] > 0.0)
        .collect();
    let best = peaks.iter().map(|&i| r[i]).fold(f64::NEG_INFINITY, f64::max);
    // Prefer the shortest lag close to the best peak to avoid octave errors.
    let i = *peaks.iter().find(|&&i| r[i] >= 0.9 * best)?;
    let denom = r[i - 1] - 2.0 * r[i] + r[i + 1];
    let delta = if denom.abs() > 1e-12 {
        (0.5 * (r[i - 1] - r[i + 1]) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    Some(((lag_min - 1 + i) as f64 + delta, r[i]))
}

/// Maximal runs of `true` as inclusive frame index ranges.
fn runs(flags: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &f) in flags.iter().enumerate() {
        match (f, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, flags.len() - 1));
    }
    out
}

pub fn extract_contours(samples: &[f64], rate: u32, config: &ContourConfig) -> Result<AcousticContours> {
    let fs = rate as f64;
    let n = (config.window_s * fs).round() as usize;
    let hop = (config.hop_s * fs).round() as usize;
    if n == 0 || hop == 0 {
        return Err(Error::InvalidArgument("analysis window and hop must be positive".into()));
    }
    if config.f0_min <= 0.0 || config.f0_max <= config.f0_min {
        return Err(Error::InvalidArgument(format!(
            "invalid F0 range [{}, {}]",
            config.f0_min, config.f0_max
        )));
    }
    if samples.len() < n {
        return Err(Error::InsufficientData(format!(
            "audio has {} samples, shorter than one {n}-sample analysis window",
            samples.len()
        )));
    }
    let duration = samples.len() as f64 / fs;
    let n_frames = (samples.len() - n) / hop + 1;
    let hop_s = hop as f64 / fs;
    let first_center = n as f64 / 2.0 / fs;
    let center = |i: usize| first_center + i as f64 * hop_s;

    let energy: Vec<f64> = (0..n_frames)
        .map(|i| db(samples[i * hop..i * hop + n].iter().map(|v| v * v).sum::<f64>() / n as f64))
        .collect();
    // Activity uses the hop-wide region around each centre so boundaries
    // are resolved to the hop rather than the window.
    let region_db: Vec<f64> = (0..n_frames)
        .map(|i| {
            let c = i * hop + n / 2;
            let lo = c.saturating_sub(hop / 2);
            let hi = (lo + hop).min(samples.len());
            db(samples[lo..hi].iter().map(|v| v * v).sum::<f64>() / (hi - lo) as f64)
        })
        .collect();
    let loudest = region_db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let threshold = config.floor_db.max(loudest - config.dynamic_range_db);
    let active: Vec<bool> = region_db.iter().map(|&e| e > threshold).collect();

    let lag_min = (fs / config.f0_max).floor().max(2.0) as usize;
    let lag_max = (fs / config.f0_min).ceil() as usize;
    let mut f0: Vec<f64> = (0..n_frames)
        .map(|i| {
            if !active[i] {
                return 0.0;
            }
            match pitch_lag(samples, i * hop, n, lag_min, lag_max) {
                Some((lag, strength)) if strength >= config.voicing_threshold => {
                    let f = fs / lag;
                    if f >= config.f0_min && f <= config.f0_max {
                        f
                    } else {
                        0.0
                    }
                }
                _ => 0.0,
            }
        })
        .collect();

    let span = |(a, b): (usize, usize)| -> (f64, f64) {
        let start = if a == 0 { 0.0 } else { center(a) - hop_s / 2.0 };
        let end = if b + 1 == n_frames { duration } else { center(b) + hop_s / 2.0 };
        (start.clamp(0.0, duration), end.clamp(0.0, duration))
    };

    let mut voiced_runs = Vec::new();
    for run in runs(&f0.iter().map(|&f| f > 0.0).collect::<Vec<_>>()) {
        let (s, e) = span(run);
        if e - s + 1e-9 >= config.min_voiced_s {
            voiced_runs.push(run);
        } else {
            f0[run.0..=run.1].iter_mut().for_each(|v| *v = 0.0);
        }
    }
    let voiced_segments: Vec<(f64, f64)> = voiced_runs.iter().map(|&r| span(r)).collect();

    let silent: Vec<bool> = (0..n_frames).map(|i| !active[i] && f0[i] == 0.0).collect();
    let pauses: Vec<(f64, f64)> = runs(&silent)
        .into_iter()
        .map(span)
        .filter(|(s, e)| e - s + 1e-9 >= config.min_pause_s)
        .collect();

    let limits = FormantLimits {
        f1: config.f1_range,
        f2: config.f2_range,
        max_bandwidth: config.max_formant_bandwidth,
    };
    let formants = (0..n_frames)
        .filter(|&i| f0[i] > 0.0)
        .filter_map(|i| frame_formants(&samples[i * hop..i * hop + n], fs, config.lpc_order, limits))
        .collect();

    let mut periods = Vec::new();
    let mut amplitudes = Vec::new();
    for &(a, b) in &voiced_runs {
        let (s, e) = span((a, b));
        let lo = (s * fs).round() as usize;
        let hi = ((e * fs).round() as usize).min(samples.len());
        let local_f0 = |t: f64| -> f64 {
            let i = ((t / fs - first_center) / hop_s).round().clamp(a as f64, b as f64) as usize;
            f0[i]
        };
        let marks = pitch_marks(samples, lo, hi, fs, &local_f0);
        if marks.len() >= 2 {
            periods.push(marks.windows(2).map(|w| (w[1] - w[0]) / fs).collect());
            amplitudes.push(marks.windows(2).map(|w| cycle_peak(samples, w[0], w[1])).collect());
        }
    }

    Ok(AcousticContours {
        rate,
        duration_s: duration,
        hop_s,
        first_center_s: first_center,
        f0,
        energy,
        active,
        voiced_segments,
        pauses,
        formants,
        periods,
        amplitudes,
    })
}

/// Position of the upward zero crossing between `j - 1` and `j`, by
/// bisection of the sinc-interpolated signal.
fn crossing(x: &[f64], j: usize) -> f64 {
    let (mut a, mut b) = ((j - 1) as f64, j as f64);
    if sinc_at(x, a) >= 0.0 || sinc_at(x, b) < 0.0 {
        return a + x[j - 1] / (x[j - 1] - x[j]);
    }
    for _ in 0..40 {
        let m = 0.5 * (a + b);
        if sinc_at(x, m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn is_upward(x: &[f64], j: usize) -> bool {
    x[j - 1] < 0.0 && x[j] >= 0.0
}

/// Cycle boundaries in fractional samples: upward zero crossings spaced
/// one local period apart, anchored at the crossing preceding the
/// largest peak of the first period (or the next one after it).
fn pitch_marks(x: &[f64], lo: usize, hi: usize, fs: f64, local_f0: &dyn Fn(f64) -> f64) -> Vec<f64> {
    let mut marks = Vec::new();
    if hi <= lo + 2 {
        return marks;
    }
    let p0 = fs / local_f0(lo as f64);
    let first_end = (lo + p0.ceil() as usize).min(hi);
    let peak = (lo..first_end).max_by(|&a, &b| x[a].total_cmp(&x[b])).unwrap_or(lo);
    let anchor = (lo.max(1)..=peak)
        .rev()
        .find(|&j| is_upward(x, j))
        .or_else(|| (peak.max(1)..hi).find(|&j| is_upward(x, j)));
    let Some(anchor) = anchor else {
        return marks;
    };
    let mut mark = crossing(x, anchor);
    marks.push(mark);
    loop {
        let p = fs / local_f0(mark);
        let expected = mark + p;
        let from = ((expected - 0.25 * p).ceil() as usize).max(1);
        let to = ((expected + 0.25 * p).floor() as usize).min(hi.saturating_sub(1));
        let next = (from..=to)
            .filter(|&j| is_upward(x, j))
            .map(|j| crossing(x, j))
            .min_by(|a, b| (a - expected).abs().total_cmp(&(b - expected).abs()));
        match next {
            Some(m) if m > mark => {
                marks.push(m);
                mark = m;
            }
            _ => break,
        }
    }
    marks
}

const SINC_HALF_WIDTH: usize = 8;

/// Value of `x` at fractional position `t` by Hann-windowed sinc
/// interpolation over `SINC_HALF_WIDTH` samples on each side.
fn sinc_at(x: &[f64], t: f64) -> f64 {
    let centre = t.floor() as isize;
    let half = SINC_HALF_WIDTH as isize;
    let width = (SINC_HALF_WIDTH + 1) as f64;
    let mut acc = 0.0;
    for k in (centre - half + 1).max(0)..=(centre + half).min(x.len() as isize - 1) {
        let d = t - k as f64;
        let sinc = if d.abs() < 1e-12 { 1.0 } else { (PI * d).sin() / (PI * d) };
        let window = 0.5 * (1.0 + (PI * d / width).cos());
        acc += x[k as usize] * sinc * window;
    }
    acc
}

/// Largest value of the cycle: the largest sample, refined by a ternary
/// search of the sinc-interpolated signal within one sample of it.
fn cycle_peak(x: &[f64], from: f64, to: f64) -> f64 {
    let lo = from.ceil() as usize;
    let hi = (to.floor() as usize).min(x.len() - 1);
    let Some(i) = (lo..=hi).max_by(|&a, &b| x[a].total_cmp(&x[b])) else {
        return 0.0;
    };
    if i == 0 || i + 1 >= x.len() {
        return x[i];
    }
    let (mut a, mut b) = (i as f64 - 1.0, i as f64 + 1.0);
    for _ in 0..40 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if sinc_at(x, m1) < sinc_at(x, m2) {
            a = m1;
        } else {
            b = m2;
        }
    }
    sinc_at(x, 0.5 * (a + b)).max(x[i])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const RATE: u32 = 16_000;

    fn tone(freq: f64, secs: f64) -> Vec<f64> {
        (0..(secs * RATE as f64) as usize)
            .map(|i| 0.5 * (2.0 * PI * freq * i as f64 / RATE as f64).sin())
            .collect()
    }

    fn sawtooth(freq: f64, secs: f64) -> Vec<f64> {
        (0..(secs * RATE as f64) as usize)
            .map(|i| {
                let phase = (freq * i as f64 / RATE as f64).fract();
                0.5 * (2.0 * phase - 1.0)
            })
            .collect()
    }

    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    }

    #[test]
    fn sawtooth_f0() {
        let c = extract_contours(&sawtooth(150.0, 1.0), RATE, &ContourConfig::default()).unwrap();
        assert_eq!(c.voiced_segments.len(), 1);
        let voiced: Vec<f64> = c.f0.iter().copied().filter(|&f| f > 0.0).collect();
        let m = median(voiced);
        assert!((m - 150.0).abs() < 2.0, "{m}");
        assert!(c.pauses.is_empty());
    }

    #[test]
    fn silence_is_one_pause() {
        let c = extract_contours(&vec![0.0; 16_000], RATE, &ContourConfig::default()).unwrap();
        assert!(c.voiced_segments.is_empty());
        assert_eq!(c.pauses, vec![(0.0, 1.0)]);
    }

    #[test]
    fn two_tones_and_a_gap() {
        let mut x = tone(200.0, 0.5);
        x.extend(vec![0.0; 4_800]);
        x.extend(tone(200.0, 0.5));
        let c = extract_contours(&x, RATE, &ContourConfig::default()).unwrap();
        assert_eq!(c.voiced_segments.len(), 2, "{:?}", c.voiced_segments);
        assert_eq!(c.pauses.len(), 1, "{:?}", c.pauses);
        let (s, e) = c.pauses[0];
        assert!((e - s - 0.3).abs() <= 0.02, "{s} {e}");
    }

    #[test]
    fn invariants_hold() {
        let mut x = sawtooth(120.0, 0.4);
        x.extend(vec![0.0; 2_000]);
        x.extend(tone(300.0, 0.3));
        let c = extract_contours(&x, RATE, &ContourConfig::default()).unwrap();
        assert!(c.f0.iter().all(|&f| f == 0.0 || (50.0..=500.0).contains(&f)));
        for segs in [&c.voiced_segments, &c.pauses] {
            for w in segs.windows(2) {
                assert!(w[0].1 <= w[1].0);
            }
            assert!(segs.iter().all(|&(s, e)| 0.0 <= s && s < e && e <= c.duration_s));
        }
    }

    #[test]
    fn too_short_is_an_error() {
        assert!(extract_contours(&[0.1; 100], RATE, &ContourConfig::default()).is_err());
    }

    #[test]
    fn pitch_marks_of_pure_tone_are_periodic() {
        let c = extract_contours(&tone(125.0, 0.5), RATE, &ContourConfig::default()).unwrap();
        let periods: Vec<f64> = c.periods.concat();
        assert!(periods.len() > 50);
        assert!(periods.iter().all(|p| (p - 0.008).abs() < 1e-6), "{periods:?}");
        let amps: Vec<f64> = c.amplitudes.concat();
        assert!(amps.iter().all(|a| (a - 0.5).abs() < 1e-3));
    }
}
