use crate::dst::DialogueState;
use crate::error::{Md3Error, Result};
use crate::nlu::TurnInput;
use crate::policy::Action;

use super::agent::Agent;
use super::episode::{EpisodeLog, StateDigest};

#[derive(Clone, Debug, PartialEq)]
pub struct ReplayReport {
    pub turns: usize,
    /// Turns whose recomputed digest differs from the logged one.
    pub mismatches: Vec<usize>,
    pub final_state: DialogueState,
}

/// Feeds a logged dialogue's utterances back through understanding and
/// state tracking, checking each recorded belief digest.
pub fn replay(agent: &Agent, log: &EpisodeLog) -> Result<ReplayReport> {
    let corpus = &agent.corpus;
    let candidates: Vec<usize> = log
        .candidates
        .iter()
        .map(|id| {
            corpus
                .position(id)
                .ok_or_else(|| Md3Error::NotFound(format!("document `{id}` in transcript")))
        })
        .collect::<Result<_>>()?;
    let mut state = DialogueState::new(candidates.len(), agent.n_attributes())?;
    let mut mismatches = Vec::new();
    for (t, turn) in log.turns.iter().enumerate() {
        if let Action::Ask(j) = turn.action {
            let response = turn
                .user
                .as_deref()
                .ok_or_else(|| Md3Error::Contract(format!("turn {t} has no user response")))?;
            let input = TurnInput::new(split(&turn.agent), split(response));
            let beliefs = agent.understand(&candidates, j, &input, turn.answer.as_ref())?;
            state = state.update(&beliefs)?;
        }
        if StateDigest::new(&state, &log.candidates, turn.state.top.len()) != turn.state {
            mismatches.push(t);
        }
    }
    Ok(ReplayReport {
        turns: log.turns.len(),
        mismatches,
        final_state: state,
    })
}

fn split(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}
