use std::collections::BTreeMap;
use std::fmt;

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use super::schema::AttributeSchema;
use crate::error::{Md3Error, Result};

/// One object's structured knowledge. `values[j]` is the sorted value set
/// for attribute `j`; an empty set means the attribute is missing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KBRecord {
    pub object_id: String,
    pub title: String,
    pub values: Vec<Vec<String>>,
}

impl KBRecord {
    pub fn has(&self, j: usize) -> bool {
        !self.values[j].is_empty()
    }

    /// Whether the record's value set on `j` intersects `answer`.
    pub fn matches(&self, j: usize, answer: &[String]) -> bool {
        self.values[j].iter().any(|v| answer.contains(v))
    }

    pub fn check(&self, schema: &AttributeSchema) -> Result<()> {
        if self.values.len() != schema.len() {
            return Err(Md3Error::Schema(format!(
                "record {} has {} attributes, schema has {}",
                self.object_id,
                self.values.len(),
                schema.len()
            )));
        }
        for (j, vals) in self.values.iter().enumerate() {
            if let Some(v) = vals.iter().find(|v| !schema.allows(j, v)) {
                return Err(Md3Error::Schema(format!(
                    "record {}: `{v}` is not a legal {}",
                    self.object_id,
                    schema.name(j)
                )));
            }
        }
        Ok(())
    }
}

/// Templated text realization of a record.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Document {
    pub object_id: String,
    pub sentences: Vec<Vec<String>>,
    /// Indexed by attribute.
    pub mentioned: Vec<bool>,
}

impl Document {
    pub fn len_tokens(&self) -> usize {
        self.sentences.iter().map(|s| s.len()).sum()
    }
}

/// A user answer: the values of the asked attribute, or "don't know".
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Answer {
    Unknown,
    Values(Vec<String>),
}

impl Answer {
    pub fn is_unknown(&self) -> bool {
        matches!(self, Answer::Unknown)
    }

    /// Answer a user would give about `record`'s attribute `j`.
    pub fn from_record(record: &KBRecord, j: usize) -> Self {
        if record.has(j) {
            Answer::Values(record.values[j].clone())
        } else {
            Answer::Unknown
        }
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Answer::Unknown => write!(f, "UNKNOWN"),
            Answer::Values(v) => write!(f, "{}", v.join(" | ")),
        }
    }
}

/// Serialized as the string `"UNKNOWN"` or a list of values.
impl Serialize for Answer {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Answer::Unknown => s.serialize_str("UNKNOWN"),
            Answer::Values(v) => v.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for Answer {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Str(String),
            List(Vec<String>),
        }
        match Raw::deserialize(d)? {
            Raw::Str(s) if s.eq_ignore_ascii_case("unknown") => Ok(Answer::Unknown),
            Raw::Str(s) => Err(de::Error::custom(format!("unexpected answer `{s}`"))),
            Raw::List(v) => Ok(Answer::Values(v)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedTurn {
    pub attr: String,
    pub answer: Answer,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedDialogue {
    pub target: String,
    pub candidates: Vec<String>,
    pub turns: Vec<ScriptedTurn>,
    pub guess: String,
}

// JSONL row shapes.

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct RecordRow {
    pub id: String,
    pub title: String,
    pub values: BTreeMap<String, Vec<String>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct DocumentRow {
    pub id: String,
    pub sentences: Vec<Vec<String>>,
    pub mentioned: BTreeMap<String, bool>,
}

impl RecordRow {
    pub fn from_record(r: &KBRecord, schema: &AttributeSchema) -> Self {
        let values = schema
            .attributes
            .iter()
            .zip(&r.values)
            .filter(|(_, v)| !v.is_empty())
            .map(|(a, v)| (a.clone(), v.clone()))
            .collect();
        RecordRow {
            id: r.object_id.clone(),
            title: r.title.clone(),
            values,
        }
    }

    pub fn into_record(self, schema: &AttributeSchema) -> Result<KBRecord> {
        let mut values = vec![Vec::new(); schema.len()];
        for (a, mut v) in self.values {
            let j = schema.index_of(&a)?;
            v.sort();
            v.dedup();
            values[j] = v;
        }
        Ok(KBRecord {
            object_id: self.id,
            title: self.title,
            values,
        })
    }
}

impl DocumentRow {
    pub fn from_document(d: &Document, schema: &AttributeSchema) -> Self {
        DocumentRow {
            id: d.object_id.clone(),
            sentences: d.sentences.clone(),
            mentioned: schema
                .attributes
                .iter()
                .cloned()
                .zip(d.mentioned.iter().copied())
                .collect(),
        }
    }

    pub fn into_document(self, schema: &AttributeSchema) -> Result<Document> {
        let mut mentioned = vec![false; schema.len()];
        for (a, m) in self.mentioned {
            mentioned[schema.index_of(&a)?] = m;
        }
        Ok(Document {
            object_id: self.id,
            sentences: self.sentences,
            mentioned,
        })
    }
}
