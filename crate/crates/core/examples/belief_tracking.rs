//! Follows the document and attribute beliefs through one simulated game
//! with exact answer matching and the entropy-driven question picker.

use std::sync::Arc;

use md3::corpus::{AttributeSchema, Corpus, Split};
use md3::engine::{run_episode, Agent, Episode};
use md3::policy::{Action, PolicyConfig, PolicyMode};

fn main() -> md3::Result<()> {
    let seed = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(4);
    let corpus = Arc::new(Corpus::generate(AttributeSchema::movie(), 500, 1)?);
    let policy = PolicyConfig {
        mode: PolicyMode::Oracle,
        ..PolicyConfig::default()
    };
    let agent = Agent::oracle(corpus.clone(), policy)?;
    let pool = corpus.split_indices(Split::Dialogue);
    let episode = Episode::sample(&pool, 32, seed)?;
    let (log, _) = run_episode(&agent, &episode, 0.1, seed, false)?;

    let target = corpus
        .record(&log.target)
        .expect("target is a corpus record");
    println!("target: {}", target.title);
    println!(
        "start: entropy {:.2}, target rank {}",
        log.cdie[0], log.tdr[0]
    );
    for turn in &log.turns {
        let top = &turn.state.top[0];
        match turn.action {
            Action::Ask(_) => println!(
                "ask {:<15} answer {:<40} top {} p={:.3}  entropy {:.2}  target rank {}",
                turn.subject,
                format!(
                    "{:?}",
                    turn.answer.as_ref().expect("asked turns carry an answer")
                ),
                top.id,
                top.prob,
                turn.cdie,
                turn.tdr
            ),
            Action::Guess(_) => println!(
                "guess {} (rank {}, return {:.2})",
                turn.subject, log.rank, log.total_return
            ),
        }
    }
    Ok(())
}
