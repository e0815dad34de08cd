//! Category aggregation, dynamic time warping and the HC-referenced
//! temporal contrast.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{validate_intervals, Interval, Unit};
use crate::error::{Error, Result};
use crate::features::schema::{Category, InformedFeatureSchema};
use crate::tensor::Matrix;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Sum,
    Mean,
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Aggregation::Sum),
            "mean" => Ok(Aggregation::Mean),
            other => Err(Error::InvalidArgument(format!("unknown aggregation '{other}', expected sum|mean"))),
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Sum => "sum",
            Aggregation::Mean => "mean",
        })
    }
}

/// Collapses `T×F` scores to `T×4`, one column per category in
/// [`Category::ALL`] order. Empty categories yield zero columns.
pub fn aggregate_categories(s: &Matrix, schema: &InformedFeatureSchema, mode: Aggregation) -> Result<Matrix> {
    if s.cols() != schema.len() {
        return Err(Error::Schema(format!(
            "score matrix has {} feature columns, the schema has {}",
            s.cols(),
            schema.len()
        )));
    }
    let cats: Vec<usize> = schema.entries().iter().map(|e| e.category.index()).collect();
    let sizes = schema.category_sizes();
    let mut out = Matrix::zeros(s.rows(), Category::ALL.len());
    for t in 0..s.rows() {
        let row = s.row(t);
        let dst = out.row_mut(t);
        for (f, &c) in cats.iter().enumerate() {
            dst[c] += row[f];
        }
        if mode == Aggregation::Mean {
            for (c, v) in dst.iter_mut().enumerate() {
                if sizes[c] > 0 {
                    *v /= sizes[c] as f64;
                }
            }
        }
    }
    Ok(out)
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DtwAlignment {
    /// `ref_len × C` sequence; row `j` averages the input rows mapped to `j`.
    pub warped: Matrix,
    /// `(sequence index, reference index)` pairs from `(0, 0)` to the end.
    pub path: Vec<(usize, usize)>,
    /// Sum of Euclidean frame distances along the path.
    pub cost: f64,
}

/// Classic DTW of `seq` against `reference` with steps (1,0), (0,1),
/// (1,1), anchored at both ends.
pub fn dtw_align(seq: &Matrix, reference: &Matrix) -> Result<DtwAlignment> {
    let (n, m) = (seq.rows(), reference.rows());
    if n == 0 || m == 0 {
        return Err(Error::EmptyInput("dynamic time warping needs at least one frame on each side".into()));
    }
    if seq.cols() != reference.cols() {
        return Err(Error::Shape {
            op: "dtw_align",
            left: seq.shape(),
            right: reference.shape(),
        });
    }
    let mut acc = vec![f64::INFINITY; n * m];
    for i in 0..n {
        for j in 0..m {
            let d = euclid(seq.row(i), reference.row(j));
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let diag = if i > 0 && j > 0 { acc[(i - 1) * m + j - 1] } else { f64::INFINITY };
                let up = if i > 0 { acc[(i - 1) * m + j] } else { f64::INFINITY };
                let left = if j > 0 { acc[i * m + j - 1] } else { f64::INFINITY };
                diag.min(up).min(left)
            };
            acc[i * m + j] = best + d;
        }
    }
    let mut path = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n - 1, m - 1);
    while (i, j) != (0, 0) {
        // Ties prefer the diagonal, then advancing the sequence.
        let mut next = None;
        let mut best = f64::INFINITY;
        for (di, dj) in [(1, 1), (1, 0), (0, 1)] {
            if i >= di && j >= dj {
                let v = acc[(i - di) * m + j - dj];
                if v < best {
                    best = v;
                    next = Some((i - di, j - dj));
                }
            }
        }
        (i, j) = next.expect("a predecessor exists off the origin");
        path.push((i, j));
    }
    path.reverse();

    let mut warped = Matrix::zeros(m, seq.cols());
    let mut counts = vec![0usize; m];
    for &(i, j) in &path {
        for (w, v) in warped.row_mut(j).iter_mut().zip(seq.row(i)) {
            *w += v;
        }
        counts[j] += 1;
    }
    for (j, &c) in counts.iter().enumerate() {
        warped.row_mut(j).iter_mut().for_each(|v| *v /= c as f64);
    }
    Ok(DtwAlignment {
        warped,
        path,
        cost: acc[n * m - 1],
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContrastiveProfile {
    /// Frame count of the shortest input, the common warped length.
    pub length: usize,
    /// Which input served as the warping reference: `("hc" | "pd", index)`.
    pub reference_source: (String, usize),
    /// Frame-wise mean of the warped HC runs, `L×C`.
    pub reference: Matrix,
    pub hc_paths: Vec<Vec<(usize, usize)>>,
    /// Warped PD run minus the reference, one `L×C` matrix per PD run.
    pub contrasts: Vec<Matrix>,
    pub pd_paths: Vec<Vec<(usize, usize)>>,
    /// Mean absolute deviation of the warped HC runs from the reference.
    pub hc_dispersion: f64,
}

/// Warps every run onto the shortest one (HC runs first, ties to the
/// earliest), averages the HC runs into a reference and subtracts it from
/// each warped PD run.
pub fn contrastive_profile(hc_runs: &[Matrix], pd_runs: &[Matrix]) -> Result<ContrastiveProfile> {
    if hc_runs.is_empty() {
        return Err(Error::InsufficientData(
            "the temporal contrast needs at least one HC run as reference".into(),
        ));
    }
    let all = hc_runs.iter().map(|m| ("hc", m)).chain(pd_runs.iter().map(|m| ("pd", m)));
    let mut shortest: Option<(&str, usize, &Matrix)> = None;
    let mut counters = (0usize, 0usize);
    for (kind, m) in all {
        let idx = if kind == "hc" { &mut counters.0 } else { &mut counters.1 };
        if shortest.is_none_or(|(_, _, s)| m.rows() < s.rows()) {
            shortest = Some((kind, *idx, m));
        }
        *idx += 1;
    }
    let (kind, idx, anchor) = shortest.expect("nonempty");
    let warp = |runs: &[Matrix]| -> Result<Vec<DtwAlignment>> { runs.iter().map(|r| dtw_align(r, anchor)).collect() };
    let hc = warp(hc_runs)?;
    let pd = warp(pd_runs)?;
    let l = anchor.rows();
    let mut reference = Matrix::zeros(l, anchor.cols());
    for a in &hc {
        reference.add_assign(&a.warped)?;
    }
    let reference = reference.scale(1.0 / hc.len() as f64);
    let hc_dispersion = hc
        .iter()
        .map(|a| a.warped.sub(&reference).map(|d| d.data().iter().map(|v| v.abs()).sum::<f64>() / d.len() as f64))
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum::<f64>()
        / hc.len() as f64;
    let contrasts = pd.iter().map(|a| a.warped.sub(&reference)).collect::<Result<_>>()?;
    Ok(ContrastiveProfile {
        length: l,
        reference_source: (kind.to_string(), idx),
        reference,
        hc_paths: hc.into_iter().map(|a| a.path).collect(),
        contrasts,
        pd_paths: pd.into_iter().map(|a| a.path).collect(),
        hc_dispersion,
    })
}

/// Labels of one reference frame after warping through a DTW path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlayRow {
    pub frame: usize,
    /// Start time of the first utterance frame mapped to this frame.
    pub time_s: f64,
    pub phoneme: String,
    pub word: String,
    pub emphasized: bool,
}

/// Labels every reference frame with the phoneme and word covering the
/// first utterance frame the DTW path maps onto it. Intervals are
/// half-open.
pub fn overlay_alignment(
    path: &[(usize, usize)],
    ref_len: usize,
    intervals: &[Interval],
    frame_hop_s: f64,
) -> Result<Vec<OverlayRow>> {
    validate_intervals(intervals, None)?;
    let mut first = vec![None; ref_len];
    for &(i, j) in path {
        if j < ref_len && first[j].is_none() {
            first[j] = Some(i);
        }
    }
    first
        .into_iter()
        .enumerate()
        .map(|(j, i)| {
            let i = i.ok_or_else(|| Error::InvalidArgument(format!("path does not visit reference frame {j}")))?;
            let t = i as f64 * frame_hop_s;
            let find = |unit: Unit| intervals.iter().find(|iv| iv.unit == unit && iv.contains(t));
            let word = find(Unit::Word);
            Ok(OverlayRow {
                frame: j,
                time_s: t,
                phoneme: find(Unit::Phoneme).map(|iv| iv.label.clone()).unwrap_or_default(),
                word: word.map(|iv| iv.label.clone()).unwrap_or_default(),
                emphasized: word.is_some_and(|iv| iv.emphasized),
            })
        })
        .collect()
}
