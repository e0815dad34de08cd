//! Healthy-control referenced standardisation.
//!
//! Each feature is centred on the median of the healthy-control rows of a
//! training partition and divided by their population standard deviation.

use serde::{Deserialize, Serialize};

use super::schema::InformedFeatureSchema;
use crate::data::Label;
use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Floor applied to the per-feature spread so constant features map to 0.
pub const STD_EPSILON: f64 = 1e-8;

/// One labelled row offered to [`fit_reference`].
#[derive(Clone, Copy, Debug)]
pub struct FeatureRow<'a> {
    pub id: &'a str,
    pub values: &'a [f64],
    pub label: Label,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationReference {
    pub median: Vec<f64>,
    pub std: Vec<f64>,
    pub schema_hash: String,
    pub fitted_on: String,
    pub hc_only: bool,
    /// Ids of the rows that contributed, in input order.
    pub source_ids: Vec<String>,
}

/// Lower median: for an even count the smaller of the two middle values,
/// so the statistic is always one of the observed values.
pub fn lower_median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values[(values.len() - 1) / 2]
}

pub fn population_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

fn columns_reference<'a>(
    rows: impl Iterator<Item = (&'a str, &'a [f64])> + Clone,
    names: &[&str],
    schema_hash: String,
    fitted_on: &str,
    hc_only: bool,
) -> Result<NormalizationReference> {
    let f = names.len();
    let mut ids = Vec::new();
    for (id, values) in rows.clone() {
        if values.len() != f {
            return Err(Error::Schema(format!(
                "row '{id}' has {} features, the schema has {f}",
                values.len()
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("utterance '{id}', feature '{}'", names[j]),
            });
        }
        ids.push(id.to_string());
    }
    if ids.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "normalization needs at least 2 healthy-control rows, got {}",
            ids.len()
        )));
    }
    let mut median = Vec::with_capacity(f);
    let mut std = Vec::with_capacity(f);
    let mut column = Vec::with_capacity(ids.len());
    for j in 0..f {
        column.clear();
        column.extend(rows.clone().map(|(_, v)| v[j]));
        let s = population_std(&column);
        median.push(lower_median(&mut column));
        std.push(if s < STD_EPSILON { STD_EPSILON } else { s });
    }
    Ok(NormalizationReference {
        median,
        std,
        schema_hash,
        fitted_on: fitted_on.to_string(),
        hc_only,
        source_ids: ids,
    })
}

/// Fits per-feature median and population std over the HC rows only.
pub fn fit_reference(
    rows: &[FeatureRow<'_>],
    schema: &InformedFeatureSchema,
    fitted_on: &str,
) -> Result<NormalizationReference> {
    let names: Vec<&str> = schema.names().collect();
    let hc = rows.iter().filter(|r| r.label == Label::Hc).map(|r| (r.id, r.values));
    columns_reference(hc, &names, schema.hash(), fitted_on, true)
}

/// Per-column reference over every frame of the given HC matrices, used
/// for the optional standardisation of SSL embeddings.
pub fn fit_column_reference(
    matrices: &[(&str, &Matrix)],
    fitted_on: &str,
) -> Result<NormalizationReference> {
    let d = matrices
        .first()
        .map(|(_, m)| m.cols())
        .ok_or_else(|| Error::InsufficientData("no healthy-control embeddings to fit".into()))?;
    let names: Vec<String> = (0..d).map(|j| format!("dim_{j}")).collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    for (id, m) in matrices {
        if m.cols() != d {
            return Err(Error::Schema(format!("embedding '{id}' has {} columns, expected {d}", m.cols())));
        }
    }
    let rows = matrices
        .iter()
        .flat_map(|(id, m)| (0..m.rows()).map(move |i| (*id, m.row(i))));
    let mut reference = columns_reference(rows, &names, format!("ssl:{d}"), fitted_on, true)?;
    reference.source_ids.dedup();
    Ok(reference)
}

impl NormalizationReference {
    pub fn len(&self) -> usize {
        self.median.len()
    }

    pub fn is_empty(&self) -> bool {
        self.median.is_empty()
    }

    /// `(x - median) / std` elementwise; the schema hash must match.
    pub fn normalize(&self, x: &[f64], schema_hash: &str) -> Result<Vec<f64>> {
        if schema_hash != self.schema_hash {
            return Err(Error::Schema(format!(
                "reference fitted with schema {} cannot normalise features of schema {schema_hash}",
                self.schema_hash
            )));
        }
        if x.len() != self.len() {
            return Err(Error::Schema(format!("vector has {} features, reference has {}", x.len(), self.len())));
        }
        Ok(x.iter()
            .zip(self.median.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }

    /// Normalises every row of a matrix with `len()` columns.
    pub fn normalize_rows(&self, x: &Matrix, schema_hash: &str) -> Result<Matrix> {
        let mut out = Vec::with_capacity(x.len());
        for i in 0..x.rows() {
            out.extend(self.normalize(x.row(i), schema_hash)?);
        }
        Matrix::new(x.rows(), x.cols(), out)
    }

    /// True when the reference maps every vector to itself.
    pub fn is_identity(&self) -> bool {
        self.median.iter().all(|&m| m == 0.0) && self.std.iter().all(|&s| s == 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::schema::{Category, SchemaEntry, Source};

    fn one_feature() -> InformedFeatureSchema {
        InformedFeatureSchema::new(vec![SchemaEntry {
            name: "f".into(),
            category: Category::Prosody,
            source: Source::Computed,
        }])
        .unwrap()
    }

    fn row<'a>(id: &'a str, v: &'a [f64], label: Label) -> FeatureRow<'a> {
        FeatureRow { id, values: v, label }
    }

    #[test]
    fn hand_example() {
        let s = one_feature();
        let rows = [
            row("a", &[1.0], Label::Hc),
            row("b", &[3.0], Label::Hc),
            row("c", &[5.0], Label::Hc),
        ];
        let r = fit_reference(&rows, &s, "fold0").unwrap();
        assert_eq!(r.median, vec![3.0]);
        assert!((r.std[0] - (8.0f64 / 3.0).sqrt()).abs() < 1e-12);
        let z = r.normalize(&[5.0], &s.hash()).unwrap();
        assert!((z[0] - 1.224744871391589).abs() < 1e-9);
        assert_eq!(r.normalize(&[3.0], &s.hash()).unwrap(), vec![0.0]);
        let one = r.normalize(&[3.0 + r.std[0]], &s.hash()).unwrap();
        assert!((one[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pd_rows_are_ignored() {
        let s = one_feature();
        let mut rows = vec![row("a", &[1.0], Label::Hc), row("b", &[2.0], Label::Hc)];
        let base = fit_reference(&rows, &s, "x").unwrap();
        rows.push(row("p", &[100.0], Label::Pd));
        let with_pd = fit_reference(&rows, &s, "x").unwrap();
        assert_eq!(base, with_pd);
        assert!(!with_pd.source_ids.contains(&"p".to_string()));
    }

    #[test]
    fn constant_feature_is_clamped() {
        let s = one_feature();
        let rows = [row("a", &[7.0], Label::Hc), row("b", &[7.0], Label::Hc)];
        let r = fit_reference(&rows, &s, "x").unwrap();
        assert_eq!((r.median[0], r.std[0]), (7.0, STD_EPSILON));
    }

    #[test]
    fn errors() {
        let s = one_feature();
        let one = [row("a", &[1.0], Label::Hc), row("p", &[1.0], Label::Pd)];
        assert!(matches!(fit_reference(&one, &s, "x"), Err(Error::InsufficientData(_))));
        let nan = [row("a", &[1.0], Label::Hc), row("bad", &[f64::NAN], Label::Hc)];
        let msg = fit_reference(&nan, &s, "x").unwrap_err().to_string();
        assert!(msg.contains("bad") && msg.contains("'f'"), "{msg}");
        let ok = [row("a", &[1.0], Label::Hc), row("b", &[2.0], Label::Hc)];
        let r = fit_reference(&ok, &s, "x").unwrap();
        assert!(r.normalize(&[1.0], "other").is_err());
    }

    #[test]
    fn even_count_uses_lower_median() {
        assert_eq!(lower_median(&mut [4.0, 1.0, 3.0, 2.0]), 2.0);
        assert_eq!(lower_median(&mut [2.0]), 2.0);
    }

    #[test]
    fn identity_reference() {
        let r = NormalizationReference {
            median: vec![0.0; 3],
            std: vec![1.0; 3],
            schema_hash: "h".into(),
            fitted_on: "t".into(),
            hc_only: true,
            source_ids: vec![],
        };
        assert!(r.is_identity());
        let x = [0.3, -2.0, 5.0];
        let once = r.normalize(&x, "h").unwrap();
        assert_eq!(r.normalize(&once, "h").unwrap(), x);
    }

    #[test]
    fn column_reference_over_frames() {
        let a = Matrix::from_rows(&[vec![1.0, 10.0], vec![3.0, 10.0]]);
        let b = Matrix::from_rows(&[vec![5.0, 10.0]]);
        let r = fit_column_reference(&[("a", &a), ("b", &b)], "x").unwrap();
        assert_eq!(r.median, vec![3.0, 10.0]);
        assert_eq!(r.std[1], STD_EPSILON);
        assert_eq!(r.source_ids, vec!["a", "b"]);
    }
}
