use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speech assessment task.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "VOWELS")]
    Vowels,
    #[serde(rename = "WORDS")]
    Words,
    #[serde(rename = "DDK")]
    Ddk,
    #[serde(rename = "SENTENCES")]
    Sentences,
    #[serde(rename = "READ-TEXT")]
    ReadText,
    #[serde(rename = "MONOLOGUE")]
    Monologue,
}

impl Task {
    pub const ALL: [Task; 6] = [
        Task::Vowels,
        Task::Words,
        Task::Ddk,
        Task::Sentences,
        Task::ReadText,
        Task::Monologue,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Vowels => "VOWELS",
            Task::Words => "WORDS",
            Task::Ddk => "DDK",
            Task::Sentences => "SENTENCES",
            Task::ReadText => "READ-TEXT",
            Task::Monologue => "MONOLOGUE",
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Task::ALL.into_iter().find(|t| t.as_str() == s).ok_or_else(|| {
            let allowed: Vec<_> = Task::ALL.iter().map(|t| t.as_str()).collect();
            Error::InvalidArgument(format!("unknown task '{s}', expected one of {}", allowed.join("|")))
        })
    }
}

/// Condition label. HC is class 0, PD is class 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "HC")]
    Hc,
    #[serde(rename = "PD")]
    Pd,
}

impl Label {
    pub fn index(self) -> usize {
        match self {
            Label::Hc => 0,
            Label::Pd => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Label::Hc
        } else {
            Label::Pd
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Hc => "HC",
            Label::Pd => "PD",
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One utterance entry of a JSON-Lines manifest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtteranceRecord {
    pub utterance_id: String,
    pub speaker_id: String,
    pub dataset_id: String,
    pub task: Task,
    pub label: Label,
    pub ssl_path: PathBuf,
    pub inf_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignment_path: Option<PathBuf>,
}

impl UtteranceRecord {
    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.ssl_path);
        join(&mut self.inf_path);
        if let Some(a) = &mut self.alignment_path {
            join(a);
        }
    }
}

/// Parses manifest text. Relative paths are resolved against `base` when
/// given; referenced files are not checked.
pub fn parse_manifest(text: &str, base: Option<&Path>) -> Result<Vec<UtteranceRecord>> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut rec: UtteranceRecord = serde_json::from_str(line).map_err(|e| Error::Manifest {
            line: line_no,
            reason: e.to_string(),
        })?;
        for (field, value) in [
            ("utterance_id", &rec.utterance_id),
            ("speaker_id", &rec.speaker_id),
            ("dataset_id", &rec.dataset_id),
        ] {
            if value.trim().is_empty() {
                return Err(Error::Manifest {
                    line: line_no,
                    reason: format!("{field} is empty"),
                });
            }
        }
        if !seen.insert(rec.utterance_id.clone()) {
            return Err(Error::Manifest {
                line: line_no,
                reason: format!("duplicate utterance_id '{}'", rec.utterance_id),
            });
        }
        if let Some(base) = base {
            rec.resolve(base);
        }
        records.push(rec);
    }
    Ok(records)
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Loads a manifest without requiring the referenced feature files to
/// exist (used when those files are about to be produced).
pub fn load_manifest_unchecked(path: impl AsRef<Path>) -> Result<Vec<UtteranceRecord>> {
    let path = path.as_ref();
    parse_manifest(&read_text(path)?, Some(&base_dir(path)))
}

/// Loads and validates a manifest: every SSL and informed-feature file,
/// and every alignment file that is named, must exist.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<UtteranceRecord>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let records = parse_manifest(&text, Some(&base_dir(path)))?;
    let mut line_of = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, _)| i + 1);
    for rec in &records {
        let line = line_of.next().unwrap_or(0);
        let mut files = vec![("ssl_path", &rec.ssl_path), ("inf_path", &rec.inf_path)];
        if let Some(a) = &rec.alignment_path {
            files.push(("alignment_path", a));
        }
        for (field, file) in files {
            if !file.is_file() {
                return Err(Error::Manifest {
                    line,
                    reason: format!("{field} {} does not exist", file.display()),
                });
            }
        }
    }
    Ok(records)
}

pub fn write_manifest(path: impl AsRef<Path>, records: &[UtteranceRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
