use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::record::{Answer, Document, KBRecord, ScriptedDialogue, ScriptedTurn};
use super::schema::AttributeSchema;
use crate::error::{Md3Error, Result};

/// Turn cap of the scripted dialogue generator.
pub const GENERATOR_MAX_TURNS: usize = 8;

/// Shannon entropy (bits) of attribute `j`'s value-set distribution; the
/// missing value counts as its own category.
pub fn entropy_of<R: std::borrow::Borrow<KBRecord>>(records: &[R], j: usize) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    let mut counts: HashMap<&[String], usize> = HashMap::new();
    for r in records {
        *counts.entry(r.borrow().values[j].as_slice()).or_default() += 1;
    }
    let n = records.len() as f64;
    let s: f64 = counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            p * p.log2()
        })
        .sum();
    // Subtracting from zero keeps a single-valued attribute at +0.
    0.0 - s
}

pub fn attribute_entropy(
    schema: &AttributeSchema,
    records: &[KBRecord],
    attribute: &str,
) -> Result<f64> {
    let j = schema.index_of(attribute)?;
    if records.is_empty() {
        return Err(Md3Error::Contract("entropy of an empty record set".into()));
    }
    Ok(entropy_of(records, j))
}

/// Keeps the records consistent with `answer` on attribute `j`, in input
/// order. `Unknown` keeps everything.
pub fn filter_by<'a, R: std::borrow::Borrow<KBRecord>>(
    records: &'a [R],
    j: usize,
    answer: &Answer,
) -> Vec<&'a R> {
    match answer {
        Answer::Unknown => records.iter().collect(),
        Answer::Values(vals) => records
            .iter()
            .filter(|r| r.borrow().matches(j, vals))
            .collect(),
    }
}

pub fn filter_consistent<'a>(
    schema: &AttributeSchema,
    records: &'a [KBRecord],
    attribute: &str,
    answer: &Answer,
) -> Result<Vec<&'a KBRecord>> {
    let j = schema.index_of(attribute)?;
    Ok(filter_by(records, j, answer))
}

/// Samples an attribute with probability proportional to its entropy over
/// `records`, skipping `exclude`. `None` when every entropy is zero.
pub fn sample_by_entropy<R: Rng, K: std::borrow::Borrow<KBRecord>>(
    records: &[K],
    n_attributes: usize,
    exclude: &[usize],
    rng: &mut R,
) -> Option<usize> {
    let weights: Vec<f64> = (0..n_attributes)
        .map(|j| {
            if exclude.contains(&j) {
                0.0
            } else {
                entropy_of(records, j)
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    if total <= 1e-12 {
        return None;
    }
    let mut x = rng.gen_range(0.0..total);
    for (j, w) in weights.iter().enumerate() {
        if *w <= 0.0 {
            continue;
        }
        if x < *w {
            return Some(j);
        }
        x -= w;
    }
    weights.iter().rposition(|w| *w > 0.0)
}

/// Scripted system/user dialogues: a target plus `m_candidates − 1`
/// distractors; each turn asks an attribute sampled in proportion to its
/// entropy over the still-consistent candidates, the user answers from the
/// target record, inconsistent candidates are dropped. Ends with a guess
/// once one candidate remains, nothing is left to ask, or the turn cap hits.
pub fn generate_dialogues(
    schema: &AttributeSchema,
    records: &[KBRecord],
    documents: &[Document],
    m_candidates: usize,
    n_dialogues: usize,
    seed: u64,
) -> Result<Vec<ScriptedDialogue>> {
    if m_candidates > records.len() {
        return Err(Md3Error::InvalidConfig(format!(
            "{m_candidates} candidates requested from {} records",
            records.len()
        )));
    }
    if m_candidates < 1 {
        return Err(Md3Error::InvalidConfig(
            "need at least one candidate".into(),
        ));
    }
    if documents.len() != records.len() {
        return Err(Md3Error::InvalidConfig(
            "every record needs a document".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_dialogues);
    for _ in 0..n_dialogues {
        let picked: Vec<&KBRecord> = records.choose_multiple(&mut rng, m_candidates).collect();
        let target = picked[rng.gen_range(0..picked.len())];
        out.push(script_one(schema, &picked, target, &mut rng));
    }
    Ok(out)
}

pub(crate) fn script_one<R: Rng>(
    schema: &AttributeSchema,
    candidates: &[&KBRecord],
    target: &KBRecord,
    rng: &mut R,
) -> ScriptedDialogue {
    let mut alive: Vec<&KBRecord> = candidates.to_vec();
    let mut asked: Vec<usize> = Vec::new();
    let mut turns = Vec::new();
    while alive.len() > 1 && turns.len() < GENERATOR_MAX_TURNS {
        let Some(j) = sample_by_entropy(&alive, schema.len(), &asked, rng) else {
            break;
        };
        let answer = Answer::from_record(target, j);
        alive = filter_by(&alive, j, &answer).into_iter().copied().collect();
        asked.push(j);
        turns.push((j, answer));
    }
    let guess = if alive.len() == 1 {
        alive[0]
    } else {
        alive[rng.gen_range(0..alive.len())]
    };
    ScriptedDialogue {
        target: target.object_id.clone(),
        candidates: candidates.iter().map(|r| r.object_id.clone()).collect(),
        turns: turns
            .into_iter()
            .map(|(j, answer)| ScriptedTurn {
                attr: schema.name(j).to_string(),
                answer,
            })
            .collect(),
        guess: guess.object_id.clone(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeStats {
    pub attribute: String,
    /// Records holding the attribute.
    pub num: usize,
    /// Distinct values.
    pub ent: usize,
    /// Mean values per holding record.
    pub ave: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_records: usize,
    pub attributes: Vec<AttributeStats>,
    pub mean_document_length: f64,
}

pub fn corpus_stats(
    schema: &AttributeSchema,
    records: &[KBRecord],
    documents: &[Document],
) -> Result<CorpusStats> {
    if records.is_empty() {
        return Err(Md3Error::Contract("stats of an empty corpus".into()));
    }
    let attributes = (0..schema.len())
        .map(|j| {
            let holders: Vec<&KBRecord> = records.iter().filter(|r| r.has(j)).collect();
            let mut distinct: Vec<&String> = holders.iter().flat_map(|r| &r.values[j]).collect();
            let total = distinct.len();
            distinct.sort();
            distinct.dedup();
            AttributeStats {
                attribute: schema.name(j).to_string(),
                num: holders.len(),
                ent: distinct.len(),
                ave: if holders.is_empty() {
                    0.0
                } else {
                    total as f64 / holders.len() as f64
                },
            }
        })
        .collect();
    let mean_document_length = if documents.is_empty() {
        0.0
    } else {
        documents.iter().map(|d| d.len_tokens()).sum::<usize>() as f64 / documents.len() as f64
    };
    Ok(CorpusStats {
        n_records: records.len(),
        attributes,
        mean_document_length,
    })
}
