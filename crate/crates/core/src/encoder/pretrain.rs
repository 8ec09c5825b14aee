use std::path::PathBuf;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Md3Error, Result};
use crate::nn::{argmax, Adam, Tensors};
use crate::text::Vocab;

use super::contrastive::{contrastive_loss, scores, PairSampler};
use super::params::{EncoderConfig, EncoderParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    pub hidden: usize,
    pub embed_dim: usize,
    pub sentence_rnn: bool,
    pub shared_attention: bool,
    /// Candidates per sample, one positive and `negatives - 1` negatives.
    pub negatives: usize,
    /// Passes over the usable target documents.
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Global gradient-norm clip; zero disables it.
    pub clip: f64,
    /// Optional `word v1 .. ve` text file used to initialise embeddings.
    pub embeddings: Option<PathBuf>,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            hidden: 32,
            embed_dim: 32,
            sentence_rnn: true,
            shared_attention: false,
            negatives: 8,
            epochs: 5,
            batch_size: 4,
            lr: 1e-3,
            clip: 5.0,
            embeddings: None,
        }
    }
}

impl PretrainConfig {
    pub fn encoder_config(&self, n_attributes: usize) -> EncoderConfig {
        EncoderConfig {
            n_attributes,
            hidden: self.hidden,
            embed_dim: self.embed_dim,
            sentence_rnn: self.sentence_rnn,
            shared_attention: self.shared_attention,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.embed_dim == 0 {
            return Err(Md3Error::InvalidConfig(
                "encoder dimensions must be positive".into(),
            ));
        }
        if self.negatives < 2 {
            return Err(Md3Error::InvalidConfig(
                "need at least two candidates per sample".into(),
            ));
        }
        if self.batch_size == 0 || !(self.lr > 0.0) {
            return Err(Md3Error::InvalidConfig(
                "batch size and learning rate must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    /// Mean batch loss per optimizer step.
    pub losses: Vec<f64>,
    pub skipped_attributes: Vec<String>,
}

/// Trains both towers with the contrastive objective on the documents at
/// `members`.
pub fn pretrain(
    corpus: &Corpus,
    members: &[usize],
    vocab: Vocab,
    config: &PretrainConfig,
    seed: u64,
) -> Result<(EncoderParams, PretrainReport)> {
    config.validate()?;
    let l = corpus.schema.len();
    let mut params = EncoderParams::new(config.encoder_config(l), vocab, seed);
    if let Some(path) = &config.embeddings {
        let found = params.load_embeddings(path)?;
        info!("loaded {found} pretrained embedding rows");
    }
    let ids: Vec<Vec<Vec<usize>>> = corpus.documents.iter().map(|d| params.doc_ids(d)).collect();
    let sampler = PairSampler::new(&corpus.records, &corpus.documents, members, l);
    let skipped: Vec<String> = sampler
        .skipped()
        .into_iter()
        .map(|j| corpus.schema.name(j).to_string())
        .collect();
    for name in &skipped {
        warn!("attribute `{name}` has no valid contrastive samples; skipping it");
    }
    if skipped.len() == l {
        return Err(Md3Error::Contract(
            "no attribute admits a contrastive sample".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut adam = Adam::new(&params.weights, config.lr);
    let mut report = PretrainReport {
        losses: Vec::new(),
        skipped_attributes: skipped,
    };
    let mut targets = sampler.targets();
    for epoch in 0..config.epochs {
        targets.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_n = 0;
        for chunk in targets.chunks(config.batch_size) {
            let mut grads = params.weights.zeros_like();
            let mut total = 0.0;
            let mut n = 0;
            for &t in chunk {
                let Some(sample) =
                    sampler.sample_for(&corpus.records, t, config.negatives, &mut rng)
                else {
                    continue;
                };
                total += contrastive_loss(&params, &ids, &sample, Some(&mut grads));
                n += 1;
            }
            if n == 0 {
                continue;
            }
            grads.scale(1.0 / n as f64);
            if !grads.all_finite() || !total.is_finite() {
                return Err(Md3Error::Numeric {
                    tensor: "encoder gradient".into(),
                });
            }
            clip_norm(&mut grads, config.clip);
            adam.step(&mut params.weights, &grads);
            report.losses.push(total / n as f64);
            epoch_loss += total;
            epoch_n += n;
        }
        info!(
            "pretrain epoch {}: mean loss {:.4} over {epoch_n} samples",
            epoch + 1,
            epoch_loss / epoch_n.max(1) as f64
        );
    }
    if !params.weights.all_finite() {
        return Err(Md3Error::Numeric {
            tensor: "encoder weights".into(),
        });
    }
    Ok((params, report))
}

pub(crate) fn clip_norm<T: Tensors>(grads: &mut T, max_norm: f64) {
    if max_norm <= 0.0 {
        return;
    }
    let norm = grads
        .tensors()
        .iter()
        .flat_map(|t| t.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
}

/// Fraction of sampled batches over `members` in which the positive
/// candidate strictly outscores every negative.
pub fn retrieval_accuracy(
    params: &EncoderParams,
    corpus: &Corpus,
    members: &[usize],
    batches: usize,
    negatives: usize,
    seed: u64,
) -> Result<f64> {
    let ids: Vec<Vec<Vec<usize>>> = corpus.documents.iter().map(|d| params.doc_ids(d)).collect();
    let sampler = PairSampler::new(
        &corpus.records,
        &corpus.documents,
        members,
        corpus.schema.len(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0;
    let mut n = 0;
    for _ in 0..batches {
        let Some(sample) = sampler.sample(&corpus.records, negatives, &mut rng) else {
            continue;
        };
        let s = scores(params, &ids, &sample);
        let best = argmax(&s);
        let unique = s.iter().filter(|&&v| v == s[best]).count() == 1;
        if best == sample.positive && unique {
            hits += 1;
        }
        n += 1;
    }
    if n == 0 {
        return Err(Md3Error::Contract(
            "no held-out batch could be sampled".into(),
        ));
    }
    Ok(hits as f64 / n as f64)
}
