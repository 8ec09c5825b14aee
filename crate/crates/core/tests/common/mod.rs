#![allow(dead_code)]

use std::sync::Arc;

use md3::checkpoint::Checkpoint;
use md3::corpus::{AttributeSchema, Corpus};
use md3::encoder::{DocReps, EncoderConfig, EncoderParams};
use md3::engine::{Agent, NluMode, Templates};
use md3::nlu::NluParams;
use md3::policy::{PolicyConfig, PolicyMode, PolicyParams};
use md3::text::Vocab;

pub fn movies(n: usize, seed: u64) -> Arc<Corpus> {
    Arc::new(Corpus::generate(AttributeSchema::movie(), n, seed).unwrap())
}

/// Agent with small untrained networks; enough to exercise every code
/// path of the learned policy quickly.
pub fn tiny_agent(corpus: Arc<Corpus>, mode: PolicyMode, nlu: NluMode) -> Agent {
    let templates = Templates::for_attributes(&corpus.schema.attributes);
    let template_tokens = templates.tokens();
    let vocab = Vocab::build(
        corpus
            .documents
            .iter()
            .flat_map(|d| d.sentences.iter().flatten().map(|s| s.as_str()))
            .chain(template_tokens.iter().map(|s| s.as_str())),
    );
    let mut cfg = EncoderConfig::new(corpus.schema.len());
    cfg.hidden = 2;
    cfg.embed_dim = 4;
    cfg.sentence_rnn = false;
    let encoder = EncoderParams::new(cfg, vocab, 5);
    let reps = Arc::new(DocReps::build(&encoder, &corpus).unwrap());
    let mut ck = Checkpoint::new(&corpus.schema, encoder);
    ck.nlu = Some(NluParams::for_encoder(&ck.encoder, 6));
    ck.policy = Some(PolicyParams::new(ck.encoder.config.rep_dim(), 7));
    let policy = PolicyConfig {
        mode,
        ..PolicyConfig::default()
    };
    Agent::with_model(corpus, Arc::new(ck), reps, policy, nlu).unwrap()
}

pub fn oracle_agent(corpus: Arc<Corpus>, mode: PolicyMode) -> Agent {
    let policy = PolicyConfig {
        mode,
        ..PolicyConfig::default()
    };
    Agent::oracle(corpus, policy).unwrap()
}
