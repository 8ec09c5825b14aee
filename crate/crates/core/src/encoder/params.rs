use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Md3Error, Result};
use crate::nn::{AttentionPool, BiGru, BiGruTrace, Mat, PoolTrace, Projected, Tensors};
use crate::text::Vocab;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tower {
    Target,
    Candidate,
}

impl Tower {
    fn index(self) -> usize {
        match self {
            Tower::Target => 0,
            Tower::Candidate => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub n_attributes: usize,
    /// Hidden size per direction; tower outputs are `2 * hidden`.
    pub hidden: usize,
    pub embed_dim: usize,
    /// Run a bidirectional GRU over sentence vectors (otherwise sentence
    /// attention pools the word-level sentence vectors directly).
    pub sentence_rnn: bool,
    /// One attention query shared by every attribute (plain hierarchical
    /// attention instead of the attribute-indexed variant).
    pub shared_attention: bool,
}

impl EncoderConfig {
    pub fn new(n_attributes: usize) -> Self {
        EncoderConfig {
            n_attributes,
            hidden: 32,
            embed_dim: 32,
            sentence_rnn: true,
            shared_attention: false,
        }
    }

    pub fn output_dim(&self) -> usize {
        2 * self.hidden
    }

    /// Width of one attribute row of a document representation.
    pub fn rep_dim(&self) -> usize {
        4 * self.hidden
    }

    fn n_queries(&self) -> usize {
        if self.shared_attention {
            1
        } else {
            self.n_attributes
        }
    }

    fn query(&self, attribute: usize) -> usize {
        if self.shared_attention {
            0
        } else {
            attribute
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TowerParams {
    pub word_rnn: BiGru,
    pub word_attention: AttentionPool,
    pub sentence_rnn: Option<BiGru>,
    pub sentence_attention: AttentionPool,
}

impl TowerParams {
    fn new<R: Rng>(config: &EncoderConfig, rng: &mut R) -> Self {
        let out = config.output_dim();
        TowerParams {
            word_rnn: BiGru::new(config.embed_dim, config.hidden, rng),
            word_attention: AttentionPool::new(out, config.n_queries(), rng),
            sentence_rnn: config
                .sentence_rnn
                .then(|| BiGru::new(out, config.hidden, rng)),
            sentence_attention: AttentionPool::new(out, config.n_queries(), rng),
        }
    }

    fn zeros_like(&self) -> Self {
        TowerParams {
            word_rnn: self.word_rnn.zeros_like(),
            word_attention: self.word_attention.zeros_like(),
            sentence_rnn: self.sentence_rnn.as_ref().map(|r| r.zeros_like()),
            sentence_attention: self.sentence_attention.zeros_like(),
        }
    }
}

impl Tensors for TowerParams {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = self.word_rnn.tensors();
        t.extend(self.word_attention.tensors());
        if let Some(r) = &self.sentence_rnn {
            t.extend(r.tensors());
        }
        t.extend(self.sentence_attention.tensors());
        t
    }
    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.word_rnn.tensors_mut();
        t.extend(self.word_attention.tensors_mut());
        if let Some(r) = &mut self.sentence_rnn {
            t.extend(r.tensors_mut());
        }
        t.extend(self.sentence_attention.tensors_mut());
        t
    }
}

/// Trainable tensors: one embedding table shared by both towers, and the
/// two towers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderWeights {
    pub embeddings: Mat,
    pub towers: [TowerParams; 2],
}

impl EncoderWeights {
    pub fn zeros_like(&self) -> Self {
        EncoderWeights {
            embeddings: Mat::zeros(self.embeddings.rows, self.embeddings.cols),
            towers: [self.towers[0].zeros_like(), self.towers[1].zeros_like()],
        }
    }
}

impl Tensors for EncoderWeights {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = vec![self.embeddings.data.as_slice()];
        t.extend(self.towers[0].tensors());
        t.extend(self.towers[1].tensors());
        t
    }
    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let [a, b] = &mut self.towers;
        let mut t = vec![self.embeddings.data.as_mut_slice()];
        t.extend(a.tensors_mut());
        t.extend(b.tensors_mut());
        t
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub config: EncoderConfig,
    pub vocab: Vocab,
    pub weights: EncoderWeights,
}

struct SentenceTrace {
    ids: Vec<usize>,
    rnn: BiGruTrace,
    proj: Projected,
}

struct AttributeTrace {
    word_pools: Vec<PoolTrace>,
    sentence_inputs: Vec<Vec<f64>>,
    sentence_rnn: Option<BiGruTrace>,
    sentence_states: Vec<Vec<f64>>,
    sentence_proj: Projected,
    pool: PoolTrace,
}

/// Forward activations of one document through one tower.
pub(crate) struct DocTrace {
    tower: Tower,
    sentences: Vec<SentenceTrace>,
    attributes: Vec<AttributeTrace>,
}

impl DocTrace {
    pub fn output(&self, k: usize) -> &[f64] {
        &self.attributes[k].pool.output
    }
}

/// Attention weights of one encoding, for inspection.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionReport {
    /// Per sentence, the word attention distribution.
    pub word: Vec<Vec<f64>>,
    pub sentence: Vec<f64>,
}

impl EncoderParams {
    pub fn new(config: EncoderConfig, vocab: Vocab, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let embeddings = Mat::uniform(vocab.len(), config.embed_dim, 0.5, &mut rng);
        // Both towers start from the same weights so that matching
        // documents already score high before training; they diverge freely.
        let tower = TowerParams::new(&config, &mut rng);
        let towers = [tower.clone(), tower];
        EncoderParams {
            config,
            vocab,
            weights: EncoderWeights { embeddings, towers },
        }
    }

    /// Overwrites embedding rows from a text file of `word v1 v2 ...` lines.
    /// Returns how many vocabulary words were found.
    pub fn load_embeddings(&mut self, path: &Path) -> Result<usize> {
        let text = std::fs::read_to_string(path)?;
        let e = self.config.embed_dim;
        let mut found = 0;
        for (lineno, line) in text.lines().enumerate() {
            let mut parts = line.split_whitespace();
            let Some(word) = parts.next() else { continue };
            let vals: Vec<f64> = parts
                .map(|p| p.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| {
                    Md3Error::InvalidConfig(format!("embedding line {}: {e}", lineno + 1))
                })?;
            if vals.len() != e {
                return Err(Md3Error::InvalidConfig(format!(
                    "embedding line {} has {} values, expected {e}",
                    lineno + 1,
                    vals.len()
                )));
            }
            let id = self.vocab.id(word);
            if id != 1 || word == crate::text::UNK {
                self.weights.embeddings.row_mut(id).copy_from_slice(&vals);
                found += 1;
            }
        }
        Ok(found)
    }

    pub fn doc_ids(&self, doc: &Document) -> Vec<Vec<usize>> {
        doc.sentences.iter().map(|s| self.vocab.ids(s)).collect()
    }

    fn check_ids(ids: &[Vec<usize>]) -> Result<()> {
        if ids.is_empty() || ids.iter().any(|s| s.is_empty()) {
            return Err(Md3Error::Contract("cannot encode an empty document".into()));
        }
        Ok(())
    }

    pub(crate) fn forward(
        &self,
        ids: &[Vec<usize>],
        tower: Tower,
        attributes: &[usize],
    ) -> DocTrace {
        let tp = &self.weights.towers[tower.index()];
        let emb = &self.weights.embeddings;
        let sentences: Vec<SentenceTrace> = ids
            .iter()
            .map(|s| {
                let inputs: Vec<&[f64]> = s.iter().map(|&i| emb.row(i)).collect();
                let rnn = tp.word_rnn.forward(&inputs);
                let proj = tp.word_attention.project(&rnn.outputs);
                SentenceTrace {
                    ids: s.clone(),
                    rnn,
                    proj,
                }
            })
            .collect();
        let attributes = attributes
            .iter()
            .map(|&a| {
                let q = self.config.query(a);
                let word_pools: Vec<PoolTrace> = sentences
                    .iter()
                    .map(|s| tp.word_attention.pool(&s.rnn.outputs, &s.proj, q))
                    .collect();
                let sentence_inputs: Vec<Vec<f64>> =
                    word_pools.iter().map(|p| p.output.clone()).collect();
                let (sentence_rnn, sentence_states) = match &tp.sentence_rnn {
                    Some(rnn) => {
                        let refs: Vec<&[f64]> =
                            sentence_inputs.iter().map(|v| v.as_slice()).collect();
                        let tr = rnn.forward(&refs);
                        let states = tr.outputs.clone();
                        (Some(tr), states)
                    }
                    None => (None, sentence_inputs.clone()),
                };
                let sentence_proj = tp.sentence_attention.project(&sentence_states);
                let pool = tp
                    .sentence_attention
                    .pool(&sentence_states, &sentence_proj, q);
                AttributeTrace {
                    word_pools,
                    sentence_inputs,
                    sentence_rnn,
                    sentence_states,
                    sentence_proj,
                    pool,
                }
            })
            .collect();
        DocTrace {
            tower,
            sentences,
            attributes,
        }
    }

    /// Accumulates gradients for `d_outputs[k]`, the gradient of the
    /// `k`-th encoded attribute of `trace`.
    pub(crate) fn backward(
        &self,
        trace: &DocTrace,
        d_outputs: &[Vec<f64>],
        grads: &mut EncoderWeights,
    ) {
        let ti = trace.tower.index();
        let tp = &self.weights.towers[ti];
        let emb = &self.weights.embeddings;
        let out = self.config.output_dim();
        let mut d_word_states: Vec<Vec<Vec<f64>>> = trace
            .sentences
            .iter()
            .map(|s| vec![vec![0.0; out]; s.ids.len()])
            .collect();
        for (at, d_out) in trace.attributes.iter().zip(d_outputs) {
            if d_out.iter().all(|v| *v == 0.0) {
                continue;
            }
            let gt = &mut grads.towers[ti];
            let d_states = tp.sentence_attention.backward(
                &at.sentence_states,
                &at.sentence_proj,
                &at.pool,
                d_out,
                &mut gt.sentence_attention,
            );
            let d_sentence_inputs = match (&tp.sentence_rnn, &at.sentence_rnn) {
                (Some(rnn), Some(tr)) => {
                    let refs: Vec<&[f64]> =
                        at.sentence_inputs.iter().map(|v| v.as_slice()).collect();
                    rnn.backward(
                        tr,
                        &refs,
                        &d_states,
                        gt.sentence_rnn.as_mut().expect("grad rnn"),
                    )
                }
                _ => d_states,
            };
            for (k, s) in trace.sentences.iter().enumerate() {
                let d_hs = tp.word_attention.backward(
                    &s.rnn.outputs,
                    &s.proj,
                    &at.word_pools[k],
                    &d_sentence_inputs[k],
                    &mut gt.word_attention,
                );
                for (acc, d) in d_word_states[k].iter_mut().zip(d_hs) {
                    acc.iter_mut().zip(d).for_each(|(a, b)| *a += b);
                }
            }
        }
        for (s, d_states) in trace.sentences.iter().zip(&d_word_states) {
            let inputs: Vec<&[f64]> = s.ids.iter().map(|&i| emb.row(i)).collect();
            let dx =
                tp.word_rnn
                    .backward(&s.rnn, &inputs, d_states, &mut grads.towers[ti].word_rnn);
            for (&id, d) in s.ids.iter().zip(dx) {
                crate::nn::axpy(1.0, &d, grads.embeddings.row_mut(id));
            }
        }
    }

    /// Attribute-aware encoding of `doc` by one tower (a `2·hidden` vector).
    pub fn encode(&self, doc: &Document, attribute: usize, tower: Tower) -> Result<Vec<f64>> {
        let ids = self.doc_ids(doc);
        self.encode_ids(&ids, attribute, tower)
    }

    pub fn encode_ids(
        &self,
        ids: &[Vec<usize>],
        attribute: usize,
        tower: Tower,
    ) -> Result<Vec<f64>> {
        Self::check_ids(ids)?;
        self.check_attribute(attribute)?;
        Ok(self.forward(ids, tower, &[attribute]).output(0).to_vec())
    }

    fn check_attribute(&self, attribute: usize) -> Result<()> {
        if attribute >= self.config.n_attributes {
            return Err(Md3Error::Schema(format!(
                "attribute index {attribute} out of range"
            )));
        }
        Ok(())
    }

    pub fn attention(
        &self,
        doc: &Document,
        attribute: usize,
        tower: Tower,
    ) -> Result<AttentionReport> {
        let ids = self.doc_ids(doc);
        Self::check_ids(&ids)?;
        self.check_attribute(attribute)?;
        let tr = self.forward(&ids, tower, &[attribute]);
        let at = &tr.attributes[0];
        Ok(AttentionReport {
            word: at.word_pools.iter().map(|p| p.alpha.clone()).collect(),
            sentence: at.pool.alpha.clone(),
        })
    }

    /// Row `j` (width `4·hidden`) is `[target(doc, j); candidate(doc, j)]`.
    pub fn doc_representation(&self, doc: &Document) -> Result<Vec<f64>> {
        let ids = self.doc_ids(doc);
        Self::check_ids(&ids)?;
        let attrs: Vec<usize> = (0..self.config.n_attributes).collect();
        let t = self.forward(&ids, Tower::Target, &attrs);
        let c = self.forward(&ids, Tower::Candidate, &attrs);
        let mut q = Vec::with_capacity(self.config.n_attributes * self.config.rep_dim());
        for k in 0..attrs.len() {
            q.extend_from_slice(t.output(k));
            q.extend_from_slice(c.output(k));
        }
        Ok(q)
    }
}
