use std::io::{BufRead, Write};

use crate::corpus::{Answer, Split};
use crate::engine::{Agent, Episode, EpisodeLog, Game, HumanAnswer, NluMode};
use crate::error::Result;
use crate::policy::Action;

fn read_line<R: BufRead>(input: &mut R) -> Result<Option<String>> {
    let mut line = String::new();
    if input.read_line(&mut line)? == 0 {
        return Ok(None);
    }
    Ok(Some(line.trim().to_string()))
}

/// Parses a typed answer. Exact matching wants values, so the line is read
/// as a comma-separated list unless it says "unknown".
pub fn parse_answer(mode: NluMode, attribute: &str, line: &str) -> HumanAnswer {
    match mode {
        NluMode::Neural => HumanAnswer::Text {
            text: line.to_string(),
        },
        NluMode::Oracle => {
            let lower = line.trim().to_lowercase();
            let values =
                if lower.is_empty() || lower == "unknown" || lower.starts_with("i don't know") {
                    Answer::Unknown
                } else {
                    Answer::Values(lower.split(',').map(|s| s.trim().to_string()).collect())
                };
            HumanAnswer::Structured {
                attribute: attribute.to_string(),
                values,
            }
        }
    }
}

/// One terminal game. Returns `None` if the input ends early.
pub fn play<R: BufRead, W: Write>(
    agent: &Agent,
    m: usize,
    seed: u64,
    mut input: R,
    mut out: W,
) -> Result<Option<EpisodeLog>> {
    let pool = agent.corpus.split_indices(Split::Dialogue);
    let candidates = Episode::sample(&pool, m, seed)?.candidates;
    writeln!(out, "Think of one of these movies:")?;
    for (i, &c) in candidates.iter().enumerate() {
        writeln!(out, "{:>4}. {}", i + 1, agent.corpus.records[c].title)?;
    }
    if agent.nlu == NluMode::Oracle {
        writeln!(out, "Answer with comma-separated values, or `unknown`.")?;
    } else {
        writeln!(out, "Answer in your own words, or say you don't know.")?;
    }
    let (mut game, mut reply) = Game::start(agent, candidates, seed)?;
    loop {
        writeln!(out, "agent: {}", reply.utterance)?;
        if let Action::Guess(_) = reply.action {
            break;
        }
        if agent.nlu == NluMode::Oracle {
            write!(out, "you [{}]: ", reply.subject)?;
        } else {
            write!(out, "you: ")?;
        }
        out.flush()?;
        let Some(line) = read_line(&mut input)? else {
            writeln!(out, "\ngame abandoned")?;
            return Ok(None);
        };
        reply = game.answer(agent, &parse_answer(agent.nlu, &reply.subject, &line))?;
    }
    let target = loop {
        write!(out, "which number was yours? ")?;
        out.flush()?;
        let Some(line) = read_line(&mut input)? else {
            writeln!(out, "\ngame abandoned")?;
            return Ok(None);
        };
        match line.parse::<usize>() {
            Ok(k) if (1..=game.candidates.len()).contains(&k) => break k - 1,
            _ => writeln!(out, "enter a number from 1 to {}", game.candidates.len())?,
        }
    };
    let log = game.log(target)?;
    writeln!(
        out,
        "your movie ranked {} after {} questions; reward {:.2}",
        log.rank, log.asks, log.total_return
    )?;
    Ok(Some(log))
}
