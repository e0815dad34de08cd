use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum F1Average {
    /// Unweighted mean of the HC and PD F1 scores.
    #[default]
    Macro,
    /// F1 of the PD class only.
    BinaryPd,
}

impl FromStr for F1Average {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "macro" => Ok(F1Average::Macro),
            "binary_pd" => Ok(F1Average::BinaryPd),
            other => Err(Error::InvalidArgument(format!(
                "unknown F1 average '{other}', expected macro|binary_pd"
            ))),
        }
    }
}

impl fmt::Display for F1Average {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            F1Average::Macro => "macro",
            F1Average::BinaryPd => "binary_pd",
        })
    }
}

fn class_f1(pairs: &[(usize, usize)], class: usize) -> f64 {
    let tp = pairs.iter().filter(|&&(p, t)| p == class && t == class).count() as f64;
    let fp = pairs.iter().filter(|&&(p, t)| p == class && t != class).count() as f64;
    let fneg = pairs.iter().filter(|&&(p, t)| p != class && t == class).count() as f64;
    // 2PR/(P+R) simplifies to 2TP/(2TP+FP+FN); undefined cases count as 0.
    let denom = 2.0 * tp + fp + fneg;
    if denom == 0.0 || tp == 0.0 {
        0.0
    } else {
        2.0 * tp / denom
    }
}

/// F1 in percent over `(predicted, true)` label pairs with HC = 0, PD = 1.
pub fn f1_score(pairs: &[(usize, usize)], average: F1Average) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    100.0
        * match average {
            F1Average::Macro => 0.5 * (class_f1(pairs, 0) + class_f1(pairs, 1)),
            F1Average::BinaryPd => class_f1(pairs, 1),
        }
}

/// Arithmetic mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
