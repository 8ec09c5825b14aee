//! Trains the learned question picker with REINFORCE on simulated users,
//! with exact answer matching so that only the policy is learned.
//!
//!     cargo run --release --example reinforce_policy

use std::sync::Arc;

use md3::checkpoint::Checkpoint;
use md3::corpus::{AttributeSchema, Corpus, Split};
use md3::encoder::{pretrain, DocReps, PretrainConfig};
use md3::engine::{evaluate, train_reinforce, Agent, EvalConfig, NluMode, RlConfig};
use md3::policy::{PolicyConfig, PolicyMode, PolicyParams};
use md3::text::Vocab;

fn main() -> md3::Result<()> {
    let corpus = Arc::new(Corpus::generate(AttributeSchema::movie(), 400, 5)?);
    let vocab = Vocab::build(
        corpus
            .documents
            .iter()
            .flat_map(|d| d.sentences.iter().flatten().map(String::as_str)),
    );
    let config = PretrainConfig {
        hidden: 16,
        embed_dim: 16,
        sentence_rnn: false,
        epochs: 8,
        lr: 6e-3,
        ..PretrainConfig::default()
    };
    let (encoder, _) = pretrain(
        &corpus,
        &corpus.split_indices(Split::Pretrain),
        vocab,
        &config,
        5,
    )?;
    let reps = Arc::new(DocReps::build(&encoder, &corpus)?);
    let mut ck = Checkpoint::new(&corpus.schema, encoder);
    ck.policy = Some(PolicyParams::new(ck.encoder.config.rep_dim(), 5));

    let policy = PolicyConfig {
        mode: PolicyMode::Dapo,
        sample: true,
        ..PolicyConfig::default()
    };
    let mut agent = Agent::with_model(corpus.clone(), Arc::new(ck), reps, policy, NluMode::Oracle)?;
    let pool = corpus.split_indices(Split::Dialogue);
    let eval = EvalConfig {
        episodes: 300,
        ..EvalConfig::default()
    };
    let greedy = |a: &Agent| -> md3::Result<f64> {
        let a = a.with_policy(PolicyConfig {
            sample: false,
            ..a.policy.clone()
        })?;
        Ok(evaluate(&a, &pool, &eval, 9)?.metrics.r)
    };
    println!("mean return before training {:.3}", greedy(&agent)?);

    let rl = RlConfig {
        episodes: 2000,
        curve_every: 250,
        ..RlConfig::default()
    };
    let report = train_reinforce(&mut agent, &pool, &rl, 5)?;
    for point in &report.curve {
        println!(
            "episode {:>5}  mean return {:.3}  success {:.3}",
            point.episode, point.mean_return, point.success
        );
    }
    let (first, last) = report.improvement(0.1);
    println!("first 10% {first:.3}, last 10% {last:.3}");
    println!("mean return after training {:.3}", greedy(&agent)?);
    Ok(())
}
