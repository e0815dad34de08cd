use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// High-level speech dimension an informed feature belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Articulation,
    Glottal,
    Phonation,
    Prosody,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Articulation,
        Category::Glottal,
        Category::Phonation,
        Category::Prosody,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Articulation => "articulation",
            Category::Glottal => "glottal",
            Category::Phonation => "phonation",
            Category::Prosody => "prosody",
        }
    }
}

/// Whether a feature is computed from audio here or supplied externally.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Computed,
    External,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaEntry {
    pub name: String,
    pub category: Category,
    pub source: Source,
}

/// Ordered list of informed features; its length is `F`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InformedFeatureSchema {
    entries: Vec<SchemaEntry>,
}

const DEFAULT: &[(&str, Category, Source)] = &[
    ("avg_F1", Category::Articulation, Source::Computed),
    ("std_F1", Category::Articulation, Source::Computed),
    ("avg_F2", Category::Articulation, Source::Computed),
    ("std_F2", Category::Articulation, Source::Computed),
    ("std_GCI", Category::Glottal, Source::External),
    ("avg_OQ", Category::Glottal, Source::External),
    ("std_OQ", Category::Glottal, Source::External),
    ("avg_NAQ", Category::Glottal, Source::External),
    ("std_NAQ", Category::Glottal, Source::External),
    ("avg_HRF", Category::Glottal, Source::External),
    ("std_HRF", Category::Glottal, Source::External),
    ("avg_jitter", Category::Phonation, Source::Computed),
    ("avg_shimmer", Category::Phonation, Source::Computed),
    ("avg_APQ", Category::Phonation, Source::Computed),
    ("avg_PPQ", Category::Phonation, Source::Computed),
    ("avg_logE", Category::Phonation, Source::Computed),
    ("avg_DF0", Category::Phonation, Source::Computed),
    ("std_DF0", Category::Phonation, Source::Computed),
    ("avg_F0", Category::Prosody, Source::Computed),
    ("std_F0", Category::Prosody, Source::Computed),
    ("avg_Evoiced", Category::Prosody, Source::Computed),
    ("std_Evoiced", Category::Prosody, Source::Computed),
    ("Vrate", Category::Prosody, Source::Computed),
    ("avg_pause", Category::Prosody, Source::Computed),
    ("std_pause", Category::Prosody, Source::Computed),
    ("UVU", Category::Prosody, Source::Computed),
    ("VVU", Category::Prosody, Source::Computed),
];

impl InformedFeatureSchema {
    /// Builds a schema; names must be unique and the list nonempty.
    pub fn new(entries: Vec<SchemaEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Schema("schema has no features".into()));
        }
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature name '{}'", e.name)));
            }
        }
        Ok(Self { entries })
    }

    /// The 27 features enumerated by name: articulation 4, glottal 7,
    /// phonation 7, prosody 9. Glottal descriptors are external.
    pub fn default_schema() -> Self {
        Self {
            entries: DEFAULT
                .iter()
                .map(|&(name, category, source)| SchemaEntry {
                    name: name.into(),
                    category,
                    source,
                })
                .collect(),
        }
    }

    /// A schema of `f` generic features spread over the four categories in
    /// contiguous blocks whose sizes are as equal as possible. Used by the
    /// synthetic corpus when `F` differs from the default.
    pub fn generic(f: usize) -> Result<Self> {
        if f == 0 {
            return Err(Error::Schema("schema has no features".into()));
        }
        let entries = (0..f)
            .map(|i| SchemaEntry {
                name: format!("feat_{i:02}"),
                category: Category::ALL[(i * 4) / f],
                source: Source::External,
            })
            .collect();
        Self::new(entries)
    }

    /// Rejects schemas in which some category has no feature.
    pub fn require_all_categories(&self) -> Result<()> {
        for c in Category::ALL {
            if !self.entries.iter().any(|e| e.category == c) {
                return Err(Error::Schema(format!("category {} has no features", c.as_str())));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[SchemaEntry] {
        &self.entries
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }

    pub fn category_sizes(&self) -> [usize; 4] {
        let mut sizes = [0; 4];
        for e in &self.entries {
            sizes[e.category.index()] += 1;
        }
        sizes
    }

    /// Stable content hash (first 16 hex digits of SHA-256 over the
    /// canonical JSON encoding).
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.entries).expect("schema serialises");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("schema serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let entries: Vec<SchemaEntry> = serde_json::from_str(text)?;
        Self::new(entries)
    }

    /// Reads a schema file and checks every category is represented.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let schema = Self::from_json(&text)?;
        schema.require_all_categories()?;
        Ok(schema)
    }
}
