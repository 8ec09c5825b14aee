//! Compares the question pickers under exact answer matching at several
//! candidate-set sizes.

use std::sync::Arc;

use md3::corpus::{AttributeSchema, Corpus, Split};
use md3::engine::{evaluate, Agent, EvalConfig};
use md3::policy::{PolicyConfig, PolicyMode};

fn main() -> md3::Result<()> {
    let corpus = Arc::new(Corpus::generate(AttributeSchema::movie(), 2000, 7)?);
    let pool = corpus.split_indices(Split::Dialogue);
    println!(
        "{:<8} {:>4} {:>6} {:>6} {:>6} {:>5} {:>6}",
        "policy", "M", "S1", "S3", "MRR", "T", "R"
    );
    for mode in [PolicyMode::Oracle, PolicyMode::Fixed, PolicyMode::Rand] {
        let agent = Agent::oracle(
            corpus.clone(),
            PolicyConfig {
                mode,
                ..PolicyConfig::default()
            },
        )?;
        for m in [32, 64, 128] {
            let config = EvalConfig {
                episodes: 300,
                m,
                mask_p: 0.1,
            };
            let e = evaluate(&agent, &pool, &config, 1)?.metrics;
            println!(
                "{:<8} {m:>4} {:>6.3} {:>6.3} {:>6.3} {:>5.2} {:>6.3}",
                mode.name(),
                e.s1,
                e.s3,
                e.mrr,
                e.t,
                e.r
            );
        }
    }
    Ok(())
}
