use serde_json::Value;

use crate::data::{read_sfm1, Task, UtteranceRecord};
use crate::error::{Error, Result};
use crate::features::InformedFeatureSchema;
use crate::tensor::Matrix;

/// One utterance with its feature matrices loaded.
#[derive(Clone, Debug)]
pub struct Item {
    pub record: UtteranceRecord,
    /// `T×D` SSL embeddings.
    pub ssl: Matrix,
    /// Raw (unnormalised) informed features, length `F`.
    pub inf: Vec<f64>,
}

/// All utterances of one task, sorted by utterance id.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub task: Task,
    pub d: usize,
    pub f: usize,
    pub schema_hash: String,
    pub items: Vec<Item>,
}

impl Dataset {
    /// Builds a dataset from in-memory items, checking shapes.
    pub fn from_items(task: Task, schema: &InformedFeatureSchema, mut items: Vec<Item>) -> Result<Self> {
        items.retain(|i| i.record.task == task);
        if items.is_empty() {
            return Err(Error::InsufficientData(format!("no utterances for task {task}")));
        }
        items.sort_by(|a, b| a.record.utterance_id.cmp(&b.record.utterance_id));
        let f = schema.len();
        let d = items[0].ssl.cols();
        for it in &items {
            let id = &it.record.utterance_id;
            if it.inf.len() != f {
                return Err(Error::Schema(format!(
                    "utterance '{id}' has {} informed features, the schema has {f}",
                    it.inf.len()
                )));
            }
            if it.ssl.cols() != d {
                return Err(Error::Schema(format!(
                    "utterance '{id}' has {}-dimensional embeddings, expected {d}",
                    it.ssl.cols()
                )));
            }
            if it.ssl.rows() == 0 {
                return Err(Error::EmptyInput(format!("utterance '{id}' has no embedding frames")));
            }
        }
        Ok(Self {
            task,
            d,
            f,
            schema_hash: schema.hash(),
            items,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn index_of(&self, utterance_id: &str) -> Option<usize> {
        self.items
            .binary_search_by(|i| i.record.utterance_id.as_str().cmp(utterance_id))
            .ok()
    }

    /// Indices of the items whose speaker is in `speakers`.
    pub fn indices_of_speakers<'a>(&self, speakers: impl IntoIterator<Item = &'a String>) -> Vec<usize> {
        let set: std::collections::BTreeSet<&String> = speakers.into_iter().collect();
        (0..self.len())
            .filter(|&i| set.contains(&self.items[i].record.speaker_id))
            .collect()
    }
}

/// Reads the SSL and informed SFM1 files of every record of `task`.
pub fn load_dataset(records: &[UtteranceRecord], task: Task, schema: &InformedFeatureSchema) -> Result<Dataset> {
    let hash = schema.hash();
    let mut items = Vec::new();
    for r in records.iter().filter(|r| r.task == task) {
        let ssl = read_sfm1(&r.ssl_path)?;
        let inf = read_sfm1(&r.inf_path)?;
        if inf.matrix.rows() != 1 {
            return Err(Error::Schema(format!(
                "informed features of '{}' must be 1xF, got {:?}",
                r.utterance_id,
                inf.matrix.shape()
            )));
        }
        if let Some(h) = inf.metadata.get("schema_hash").and_then(Value::as_str) {
            if h != hash {
                return Err(Error::Schema(format!(
                    "informed features of '{}' were written with schema {h}, expected {hash}",
                    r.utterance_id
                )));
            }
        }
        items.push(Item {
            record: r.clone(),
            ssl: ssl.matrix,
            inf: inf.matrix.into_data(),
        });
    }
    Dataset::from_items(task, schema, items)
}
