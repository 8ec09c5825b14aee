//! Plays one game in the terminal. Pick a movie from the list and answer
//! each question with comma-separated values or `unknown`.
//!
//!     cargo run --example human_play -- 16

use std::io::{stdin, stdout};
use std::sync::Arc;

use md3::cli::play;
use md3::corpus::{AttributeSchema, Corpus};
use md3::engine::Agent;
use md3::policy::{PolicyConfig, PolicyMode};

fn main() -> md3::Result<()> {
    let m = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(16);
    let corpus = Arc::new(Corpus::generate(AttributeSchema::movie(), 500, 2)?);
    let policy = PolicyConfig {
        mode: PolicyMode::Oracle,
        ..PolicyConfig::default()
    };
    let agent = Agent::oracle(corpus, policy)?;
    let seed = std::process::id() as u64;
    play(&agent, m, seed, stdin().lock(), stdout())?;
    Ok(())
}
