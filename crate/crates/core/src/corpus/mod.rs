//! Attribute schema, synthetic movie corpus, scripted dialogues and
//! corpus statistics.

mod generate;
mod ops;
mod record;
mod schema;

pub mod fixtures;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

pub use generate::{
    attribute_words, doc_templates, generate_corpus, join_values, DocTemplates, MENTION_RATE,
    PARAPHRASE_RATE,
};
pub use ops::{
    attribute_entropy, corpus_stats, entropy_of, filter_by, filter_consistent, generate_dialogues,
    sample_by_entropy, AttributeStats, CorpusStats, GENERATOR_MAX_TURNS,
};
pub use record::{Answer, Document, KBRecord, ScriptedDialogue, ScriptedTurn};
pub use schema::{
    person_names, AttributeSchema, CardinalityTarget, GENRES, LANGUAGES, MOVIE_ATTRIBUTES,
    MOVIE_REFERENCE_SIZE,
};

use record::{DocumentRow, RecordRow};

use crate::error::{Md3Error, Result};

pub const RECORDS_FILE: &str = "records.jsonl";
pub const DOCUMENTS_FILE: &str = "documents.jsonl";
pub const DIALOGUES_FILE: &str = "dialogues.jsonl";
pub const SCHEMA_FILE: &str = "schema.json";

/// Share of objects used for encoder and NLU pretraining; the rest is for
/// reinforcement learning and evaluation.
pub const PRETRAIN_FRACTION: f64 = 0.7;

/// Records and documents aligned by position, with an id index.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub schema: AttributeSchema,
    pub records: Vec<KBRecord>,
    pub documents: Vec<Document>,
    index: HashMap<String, usize>,
}

/// Which side of the 70/30 split an object falls on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Pretrain,
    Dialogue,
}

impl Corpus {
    pub fn new(
        schema: AttributeSchema,
        records: Vec<KBRecord>,
        mut documents: Vec<Document>,
    ) -> Result<Self> {
        let index: HashMap<String, usize> = records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.object_id.clone(), i))
            .collect();
        if index.len() != records.len() {
            return Err(Md3Error::Schema("duplicate object ids".into()));
        }
        for r in &records {
            r.check(&schema)?;
        }
        // Align documents with records.
        let mut slots: Vec<Option<Document>> = vec![None; records.len()];
        for d in documents.drain(..) {
            let i = *index.get(&d.object_id).ok_or_else(|| {
                Md3Error::Schema(format!("document {} has no record", d.object_id))
            })?;
            for (j, &m) in d.mentioned.iter().enumerate() {
                if m && !records[i].has(j) {
                    return Err(Md3Error::Schema(format!(
                        "document {} mentions missing attribute {}",
                        d.object_id,
                        schema.name(j)
                    )));
                }
            }
            if d.sentences.is_empty() || d.sentences.iter().any(|s| s.is_empty()) {
                return Err(Md3Error::Schema(format!(
                    "document {} has an empty sentence",
                    d.object_id
                )));
            }
            slots[i] = Some(d);
        }
        let documents = slots
            .into_iter()
            .zip(&records)
            .map(|(d, r)| {
                d.ok_or_else(|| Md3Error::Schema(format!("record {} has no document", r.object_id)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Corpus {
            schema,
            records,
            documents,
            index,
        })
    }

    pub fn generate(schema: AttributeSchema, n_objects: usize, seed: u64) -> Result<Self> {
        let (records, documents) = generate_corpus(&schema, n_objects, seed)?;
        Corpus::new(schema, records, documents)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn position(&self, object_id: &str) -> Option<usize> {
        self.index.get(object_id).copied()
    }

    pub fn record(&self, object_id: &str) -> Option<&KBRecord> {
        self.position(object_id).map(|i| &self.records[i])
    }

    /// Deterministic split by a hash of the object id.
    pub fn split_of(object_id: &str) -> Split {
        let h = Sha256::digest(object_id.as_bytes());
        let x = u16::from_be_bytes([h[0], h[1]]) as f64 / 65_536.0;
        if x < PRETRAIN_FRACTION {
            Split::Pretrain
        } else {
            Split::Dialogue
        }
    }

    pub fn split_indices(&self, split: Split) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| Corpus::split_of(&self.records[i].object_id) == split)
            .collect()
    }

    /// Sub-corpus with only the given positions.
    pub fn subset(&self, indices: &[usize]) -> Corpus {
        let records: Vec<KBRecord> = indices.iter().map(|&i| self.records[i].clone()).collect();
        let documents: Vec<Document> = indices.iter().map(|&i| self.documents[i].clone()).collect();
        let index = records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.object_id.clone(), i))
            .collect();
        Corpus {
            schema: self.schema.clone(),
            records,
            documents,
            index,
        }
    }

    /// Content hash over schema, records and documents.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.schema.hash().as_bytes());
        for r in &self.records {
            hasher.update(
                serde_json::to_vec(&RecordRow::from_record(r, &self.schema)).expect("serializes"),
            );
        }
        for d in &self.documents {
            hasher.update(
                serde_json::to_vec(&DocumentRow::from_document(d, &self.schema))
                    .expect("serializes"),
            );
        }
        hex::encode(hasher.finalize())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(
            dir.join(SCHEMA_FILE),
            serde_json::to_vec_pretty(&self.schema)?,
        )?;
        write_jsonl(
            &dir.join(RECORDS_FILE),
            self.records
                .iter()
                .map(|r| RecordRow::from_record(r, &self.schema)),
        )?;
        write_jsonl(
            &dir.join(DOCUMENTS_FILE),
            self.documents
                .iter()
                .map(|d| DocumentRow::from_document(d, &self.schema)),
        )
    }

    /// Loads `records.jsonl` and `documents.jsonl` from `dir`. The schema
    /// comes from `schema.json` when present; an externally supplied dump
    /// without one gets a schema inferred from its records.
    pub fn load(dir: &Path) -> Result<Self> {
        let rows: Vec<RecordRow> = read_jsonl(&dir.join(RECORDS_FILE))?;
        let doc_rows: Vec<DocumentRow> = read_jsonl(&dir.join(DOCUMENTS_FILE))?;
        let schema_path = dir.join(SCHEMA_FILE);
        let schema = if schema_path.exists() {
            let s: AttributeSchema = serde_json::from_slice(&std::fs::read(schema_path)?)?;
            s.validate()?;
            s
        } else {
            infer_schema(&rows)?
        };
        let records = rows
            .into_iter()
            .map(|r| r.into_record(&schema))
            .collect::<Result<Vec<_>>>()?;
        let documents = doc_rows
            .into_iter()
            .map(|d| d.into_document(&schema))
            .collect::<Result<Vec<_>>>()?;
        Corpus::new(schema, records, documents)
    }
}

/// Schema for an external dump: attributes in the movie order when they
/// match it, sorted otherwise; vocabularies are the observed values.
fn infer_schema(rows: &[RecordRow]) -> Result<AttributeSchema> {
    let mut names: Vec<String> = rows.iter().flat_map(|r| r.values.keys().cloned()).collect();
    names.sort();
    names.dedup();
    let movie = AttributeSchema::movie();
    if names.iter().all(|n| movie.attributes.contains(n)) {
        names = movie.attributes.clone();
    }
    let n = rows.len().max(1);
    let mut vocab = Vec::new();
    let mut targets = Vec::new();
    for a in &names {
        let holders: Vec<&Vec<String>> = rows.iter().filter_map(|r| r.values.get(a)).collect();
        let mut vals: Vec<String> = holders.iter().flat_map(|v| v.iter().cloned()).collect();
        let total = vals.len();
        vals.sort();
        vals.dedup();
        if vals.is_empty() {
            vals.push("<none>".into());
        }
        targets.push(CardinalityTarget {
            coverage: (holders.len().max(1) as f64 / n as f64).min(1.0),
            distinct: vals.len(),
            mean_values: (total as f64 / holders.len().max(1) as f64).max(1.0),
            open_vocabulary: true,
        });
        vocab.push(vals);
    }
    AttributeSchema::new(names, vocab, targets, n)
}

pub(crate) fn write_jsonl<T: serde::Serialize, I: IntoIterator<Item = T>>(
    path: &Path,
    rows: I,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in rows {
        serde_json::to_writer(&mut w, &row)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = File::open(path).map_err(|e| {
        Md3Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

pub fn save_dialogues(path: &Path, dialogues: &[ScriptedDialogue]) -> Result<()> {
    write_jsonl(path, dialogues.iter())
}

pub fn load_dialogues(path: &Path) -> Result<Vec<ScriptedDialogue>> {
    read_jsonl(path)
}
