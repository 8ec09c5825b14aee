use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{check_finite, Md3Error, Result};

use super::params::EncoderParams;

/// Per-document representations `Q` (one `L × 4h` matrix each, stored
/// row-major), the dataset mean, and the squared deviations from it.
#[derive(Clone, Debug, PartialEq)]
pub struct DocReps {
    pub n_attributes: usize,
    pub rep_dim: usize,
    pub ids: Vec<String>,
    pub q: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub diff: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct RepsFile {
    checkpoint_hash: String,
    corpus_hash: String,
    n_attributes: usize,
    rep_dim: usize,
    ids: Vec<String>,
    q: Vec<Vec<f64>>,
}

/// Squared deviation of every representation from the mean of all of them.
pub fn differentiate(q: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let Some(first) = q.first() else {
        return Err(Md3Error::Contract(
            "no representations to differentiate".into(),
        ));
    };
    let mut mean = vec![0.0; first.len()];
    for row in q {
        if row.len() != mean.len() {
            return Err(Md3Error::Contract("representations differ in size".into()));
        }
        mean.iter_mut().zip(row).for_each(|(m, v)| *m += v);
    }
    let n = q.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    let diff = q
        .iter()
        .map(|row| {
            row.iter()
                .zip(&mean)
                .map(|(v, m)| (v - m) * (v - m))
                .collect()
        })
        .collect();
    Ok((mean, diff))
}

impl DocReps {
    pub fn from_q(
        ids: Vec<String>,
        q: Vec<Vec<f64>>,
        n_attributes: usize,
        rep_dim: usize,
    ) -> Result<Self> {
        if ids.len() != q.len() {
            return Err(Md3Error::Contract(
                "ids and representations differ in count".into(),
            ));
        }
        if q.iter().any(|r| r.len() != n_attributes * rep_dim) {
            return Err(Md3Error::Contract(
                "representation has the wrong shape".into(),
            ));
        }
        for row in &q {
            check_finite("document representation", row)?;
        }
        let (mean, diff) = differentiate(&q)?;
        Ok(DocReps {
            n_attributes,
            rep_dim,
            ids,
            q,
            mean,
            diff,
        })
    }

    /// Encodes every document of `corpus`.
    pub fn build(params: &EncoderParams, corpus: &Corpus) -> Result<Self> {
        let q = corpus
            .documents
            .iter()
            .map(|d| params.doc_representation(d))
            .collect::<Result<Vec<_>>>()?;
        let ids = corpus
            .documents
            .iter()
            .map(|d| d.object_id.clone())
            .collect();
        Self::from_q(ids, q, params.config.n_attributes, params.config.rep_dim())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Row `j` of a stored `L × 4h` matrix.
    pub fn row<'a>(&self, m: &'a [f64], j: usize) -> &'a [f64] {
        &m[j * self.rep_dim..(j + 1) * self.rep_dim]
    }

    pub fn save(&self, path: &Path, checkpoint_hash: &str, corpus_hash: &str) -> Result<()> {
        let file = RepsFile {
            checkpoint_hash: checkpoint_hash.to_string(),
            corpus_hash: corpus_hash.to_string(),
            n_attributes: self.n_attributes,
            rep_dim: self.rep_dim,
            ids: self.ids.clone(),
            q: self.q.clone(),
        };
        std::fs::write(path, serde_json::to_vec(&file)?)?;
        Ok(())
    }

    /// Loads a cache file, returning `None` when it was computed for a
    /// different checkpoint or corpus.
    pub fn load_cached(
        path: &Path,
        checkpoint_hash: &str,
        corpus_hash: &str,
    ) -> Result<Option<Self>> {
        if !path.exists() {
            return Ok(None);
        }
        let file: RepsFile = serde_json::from_slice(&std::fs::read(path)?)?;
        if file.checkpoint_hash != checkpoint_hash || file.corpus_hash != corpus_hash {
            return Ok(None);
        }
        Self::from_q(file.ids, file.q, file.n_attributes, file.rep_dim).map(Some)
    }
}
