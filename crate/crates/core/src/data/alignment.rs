use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Phoneme,
    Word,
}

/// One forced-alignment interval, `[start_s, end_s)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub unit: Unit,
    pub label: String,
    pub start_s: f64,
    pub end_s: f64,
    /// Marks words carrying emphasis in prosody-focused sentences.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub emphasized: bool,
}

impl Interval {
    pub fn contains(&self, t: f64) -> bool {
        self.start_s <= t && t < self.end_s
    }
}

/// Checks bounds and ordering. Intervals of the same unit must be
/// time-ordered and must not overlap; phonemes and words may nest.
pub fn validate_intervals(intervals: &[Interval], duration_s: Option<f64>) -> Result<()> {
    for unit in [Unit::Phoneme, Unit::Word] {
        let mut prev_end = f64::NEG_INFINITY;
        for iv in intervals.iter().filter(|i| i.unit == unit) {
            if !(iv.start_s.is_finite() && iv.end_s.is_finite()) || iv.start_s < 0.0 || iv.end_s <= iv.start_s {
                return Err(Error::InvalidArgument(format!(
                    "interval '{}' has invalid bounds [{}, {})",
                    iv.label, iv.start_s, iv.end_s
                )));
            }
            if let Some(d) = duration_s {
                if iv.end_s > d + 1e-9 {
                    return Err(Error::InvalidArgument(format!(
                        "interval '{}' ends at {} s, past the audio duration {d} s",
                        iv.label, iv.end_s
                    )));
                }
            }
            if iv.start_s < prev_end {
                return Err(Error::InvalidArgument(format!(
                    "interval '{}' starting at {} s overlaps or precedes the previous {unit:?} interval ending at {prev_end} s",
                    iv.label, iv.start_s
                )));
            }
            prev_end = iv.end_s;
        }
    }
    Ok(())
}

pub fn parse_alignment(text: &str) -> Result<Vec<Interval>> {
    let intervals: Vec<Interval> = serde_json::from_str(text)?;
    validate_intervals(&intervals, None)?;
    Ok(intervals)
}

pub fn load_alignment(path: impl AsRef<Path>) -> Result<Vec<Interval>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_alignment(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_accepts_nested_units() {
        let text = r#"[
            {"unit":"word","label":"casa","start_s":0.0,"end_s":0.4,"emphasized":true},
            {"unit":"phoneme","label":"k","start_s":0.0,"end_s":0.1},
            {"unit":"phoneme","label":"a","start_s":0.1,"end_s":0.2}
        ]"#;
        let ivs = parse_alignment(text).unwrap();
        assert_eq!(ivs.len(), 3);
        assert!(ivs[0].emphasized);
        assert!(!ivs[1].emphasized);
    }

    #[test]
    fn overlapping_same_unit_is_an_error() {
        let text = r#"[
            {"unit":"phoneme","label":"a","start_s":0.0,"end_s":0.2},
            {"unit":"phoneme","label":"b","start_s":0.1,"end_s":0.3}
        ]"#;
        assert!(parse_alignment(text).is_err());
    }

    #[test]
    fn half_open_boundaries() {
        let a = Interval {
            unit: Unit::Phoneme,
            label: "a".into(),
            start_s: 0.0,
            end_s: 0.1,
            emphasized: false,
        };
        assert!(a.contains(0.0));
        assert!(!a.contains(0.1));
    }

    #[test]
    fn interval_past_duration_is_rejected() {
        let ivs = vec![Interval {
            unit: Unit::Word,
            label: "w".into(),
            start_s: 0.5,
            end_s: 2.0,
            emphasized: false,
        }];
        assert!(validate_intervals(&ivs, Some(1.0)).is_err());
        assert!(validate_intervals(&ivs, Some(2.0)).is_ok());
    }
}
