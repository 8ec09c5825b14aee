use log::info;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Answer, Corpus, ScriptedDialogue};
use crate::encoder::{DocReps, EncoderParams};
use crate::engine::nlg::Templates;
use crate::error::{Md3Error, Result};
use crate::nn::{argmax, Adam, Tensors};

use super::model::{NluParams, TurnInput};

/// A labelled turn: the rendered exchange, its gold attribute and unknown
/// flag, and the candidate documents it was asked over.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NluExample {
    pub turn: TurnInput,
    pub attribute: usize,
    pub unknown: bool,
    /// Row indices into the document representations.
    pub candidates: Vec<usize>,
    /// Candidates consistent with the answer (all of them when unknown).
    pub matching: Vec<bool>,
    /// Position of the dialogue's target within `candidates`.
    pub target: usize,
}

impl NluExample {
    fn target_distribution(&self) -> Vec<f64> {
        let n = self.matching.iter().filter(|m| **m).count().max(1) as f64;
        self.matching
            .iter()
            .map(|&m| if m { 1.0 / n } else { 0.0 })
            .collect()
    }
}

/// Renders scripted dialogues into labelled turns. Each answer is replaced
/// by "don't know" with probability `unknown_rate`.
pub fn build_examples(
    dialogues: &[ScriptedDialogue],
    corpus: &Corpus,
    reps: &DocReps,
    templates: &Templates,
    unknown_rate: f64,
    seed: u64,
) -> Result<Vec<NluExample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let row_of = |id: &str| -> Result<usize> {
        reps.ids
            .iter()
            .position(|x| x == id)
            .ok_or_else(|| Md3Error::NotFound(format!("no representation for `{id}`")))
    };
    let mut out = Vec::new();
    for d in dialogues {
        let candidates = d
            .candidates
            .iter()
            .map(|c| row_of(c))
            .collect::<Result<Vec<_>>>()?;
        let records = d
            .candidates
            .iter()
            .map(|c| {
                corpus
                    .record(c)
                    .ok_or_else(|| Md3Error::NotFound(c.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        let target = d
            .candidates
            .iter()
            .position(|c| *c == d.target)
            .ok_or_else(|| Md3Error::Contract("dialogue target is not a candidate".into()))?;
        for turn in &d.turns {
            let j = corpus.schema.index_of(&turn.attr)?;
            let answer = if rng.gen_bool(unknown_rate) {
                Answer::Unknown
            } else {
                turn.answer.clone()
            };
            let question = templates.ask(j, &mut rng)?;
            let response = templates.answer(j, &answer, &mut rng)?;
            let matching = match &answer {
                Answer::Unknown => vec![true; records.len()],
                Answer::Values(v) => records.iter().map(|r| r.matches(j, v)).collect(),
            };
            out.push(NluExample {
                turn: TurnInput::new(question, response),
                attribute: j,
                unknown: answer.is_unknown(),
                candidates: candidates.clone(),
                matching,
                target,
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NluConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub clip: f64,
    /// Share of answers turned into "don't know" when building examples.
    pub unknown_rate: f64,
    /// Share of examples held out for the report.
    pub held_out: f64,
}

impl Default for NluConfig {
    fn default() -> Self {
        NluConfig {
            epochs: 5,
            lr: 1e-3,
            batch_size: 8,
            clip: 5.0,
            unknown_rate: 0.1,
            held_out: 0.1,
        }
    }
}

/// Accuracy of the attribute and unknown heads, and the mean reciprocal
/// rank of the dialogue target under `p_hat` on answered turns.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NluEval {
    pub attribute_accuracy: f64,
    pub unknown_accuracy: f64,
    pub matching_mrr: f64,
    pub n: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NluReport {
    pub losses: Vec<f64>,
    pub train: NluEval,
    pub held_out: NluEval,
}

fn candidate_reps<'a>(reps: &'a DocReps, ex: &NluExample) -> Vec<&'a [f64]> {
    ex.candidates
        .iter()
        .map(|&i| reps.q[i].as_slice())
        .collect()
}

pub fn evaluate_nlu(
    params: &NluParams,
    encoder: &EncoderParams,
    reps: &DocReps,
    examples: &[NluExample],
) -> Result<NluEval> {
    let mut eval = NluEval::default();
    let mut answered = 0;
    for ex in examples {
        let b = params.infer(&ex.turn, encoder, &candidate_reps(reps, ex))?;
        if argmax(&b.pi_tilde) == ex.attribute {
            eval.attribute_accuracy += 1.0;
        }
        if (b.alpha > 0.5) == ex.unknown {
            eval.unknown_accuracy += 1.0;
        }
        if !ex.unknown {
            let t = b.p_hat[ex.target];
            let rank = 1 + b
                .p_hat
                .iter()
                .enumerate()
                .filter(|&(i, &p)| p > t || (p == t && i < ex.target))
                .count();
            eval.matching_mrr += 1.0 / rank as f64;
            answered += 1;
        }
    }
    eval.n = examples.len();
    if eval.n > 0 {
        eval.attribute_accuracy /= eval.n as f64;
        eval.unknown_accuracy /= eval.n as f64;
    }
    if answered > 0 {
        eval.matching_mrr /= answered as f64;
    }
    Ok(eval)
}

/// Fits the turn encoder and heads on `examples`. Word embeddings come from
/// the encoder and stay fixed.
pub fn train_nlu(
    examples: &[NluExample],
    encoder: &EncoderParams,
    reps: &DocReps,
    config: &NluConfig,
    seed: u64,
) -> Result<(NluParams, NluReport)> {
    if examples.is_empty() {
        return Err(Md3Error::InvalidConfig(
            "no labelled turns to train on".into(),
        ));
    }
    if config.batch_size == 0 || !(config.lr >= 0.0) || !(0.0..1.0).contains(&config.held_out) {
        return Err(Md3Error::InvalidConfig("bad NLU training settings".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut rng);
    let n_held = ((examples.len() as f64) * config.held_out).round() as usize;
    let (held, train) = order.split_at(n_held.min(examples.len().saturating_sub(1)));
    let mut train = train.to_vec();

    let mut params = NluParams::for_encoder(encoder, seed);
    let emb = &encoder.weights.embeddings;
    let ids: Vec<Vec<usize>> = examples
        .iter()
        .map(|e| e.turn.ids(&encoder.vocab))
        .collect();
    let mut adam = Adam::new(&params, config.lr);
    let mut report = NluReport::default();
    for epoch in 0..config.epochs {
        train.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in train.chunks(config.batch_size) {
            let mut grads = params.zeros_like();
            let mut total = 0.0;
            for &k in chunk {
                let ex = &examples[k];
                let trace = params.trace_turn(&ids[k], emb)?;
                let (loss, _) = params.supervised_loss(
                    &trace,
                    &candidate_reps(reps, ex),
                    ex.attribute,
                    ex.unknown,
                    &ex.target_distribution(),
                    Some(&mut grads),
                    emb,
                )?;
                total += loss;
            }
            grads.scale(1.0 / chunk.len() as f64);
            if !grads.all_finite() {
                return Err(Md3Error::Numeric {
                    tensor: "nlu gradient".into(),
                });
            }
            crate::encoder::clip_norm(&mut grads, config.clip);
            adam.step(&mut params, &grads);
            report.losses.push(total / chunk.len() as f64);
            epoch_loss += total;
        }
        info!(
            "nlu epoch {}: mean loss {:.4}",
            epoch + 1,
            epoch_loss / train.len().max(1) as f64
        );
    }
    let pick = |idx: &[usize]| idx.iter().map(|&k| examples[k].clone()).collect::<Vec<_>>();
    report.train = evaluate_nlu(&params, encoder, reps, &pick(&train))?;
    report.held_out = evaluate_nlu(&params, encoder, reps, &pick(held))?;
    Ok((params, report))
}
