use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::engine::{Agent, EpisodeLog, Game, HumanAnswer, NluMode, Reply};
use crate::error::{Md3Error, Result};
use crate::policy::Action;

use super::api::{BeliefEntry, CandidateCard, GameView, RevealResponse, TurnView};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    AwaitingAnswer,
    Guessed,
    Expired,
}

pub struct GameSession {
    pub id: String,
    pub agent: Arc<Agent>,
    pub game: Game,
    pub status: Status,
    pub turns: Vec<TurnView>,
    pub result: Option<RevealResponse>,
    pub created: u64,
    pub updated: Instant,
    transcript: Option<PathBuf>,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl GameSession {
    pub fn start(
        id: String,
        agent: Arc<Agent>,
        candidates: Vec<usize>,
        seed: u64,
        transcript: Option<PathBuf>,
    ) -> Result<(Self, Reply)> {
        let (game, reply) = Game::start(&agent, candidates, seed)?;
        let mut s = GameSession {
            id,
            agent,
            game,
            status: Status::AwaitingAnswer,
            turns: Vec::new(),
            result: None,
            created: unix_now(),
            updated: Instant::now(),
            transcript,
        };
        s.push_turn(&reply);
        s.record(&serde_json::json!({
            "event": "create",
            "seed": seed,
            "candidates": s.game.ids,
            "reply": reply,
        }))?;
        Ok((s, reply))
    }

    fn push_turn(&mut self, reply: &Reply) {
        if let Action::Guess(_) = reply.action {
            self.status = Status::Guessed;
        }
        let (attribute, options) = match reply.action {
            Action::Ask(j) => (Some(reply.subject.clone()), self.options(j)),
            Action::Guess(_) => (None, Vec::new()),
        };
        self.turns.push(TurnView {
            question: reply.utterance.clone(),
            action: if attribute.is_some() { "ask" } else { "guess" }.into(),
            attribute,
            options,
            answer: None,
            belief_top: self.belief_top(8),
            entropy: self.game.state.entropy(),
        });
    }

    /// Distinct values of attribute `j` among the candidates, for answer chips.
    pub fn options(&self, j: usize) -> Vec<String> {
        let mut out: Vec<String> = self
            .game
            .candidates
            .iter()
            .flat_map(|&c| self.agent.corpus.records[c].values[j].iter().cloned())
            .collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn belief_top(&self, k: usize) -> Vec<BeliefEntry> {
        self.game
            .state
            .top(k)
            .into_iter()
            .map(|i| BeliefEntry {
                id: self.game.ids[i].clone(),
                title: self.agent.corpus.records[self.game.candidates[i]]
                    .title
                    .clone(),
                prob: self.game.state.p[i],
            })
            .collect()
    }

    pub fn cards(&self) -> Vec<CandidateCard> {
        self.game
            .candidates
            .iter()
            .map(|&c| {
                let r = &self.agent.corpus.records[c];
                let doc = &self.agent.corpus.documents[c];
                CandidateCard {
                    id: r.object_id.clone(),
                    title: r.title.clone(),
                    short_doc: doc
                        .sentences
                        .first()
                        .map(|s| s.join(" "))
                        .unwrap_or_default(),
                }
            })
            .collect()
    }

    pub fn answer(&mut self, input: &HumanAnswer) -> Result<Reply> {
        if self.status != Status::AwaitingAnswer {
            return Err(Md3Error::Conflict("this game is already decided".into()));
        }
        let reply = self.game.answer(&self.agent, input)?;
        self.updated = Instant::now();
        let logged = &self.game.turns[self.game.turns.len() - 2];
        if let Some(last) = self.turns.last_mut() {
            last.answer = logged.user.clone();
        }
        self.push_turn(&reply);
        self.record(&serde_json::json!({ "event": "answer", "input": input, "reply": reply }))?;
        Ok(reply)
    }

    /// Scores the game against the revealed target. Repeated calls return
    /// the first result.
    pub fn reveal(&mut self, target_id: &str) -> Result<RevealResponse> {
        if let Some(done) = &self.result {
            return Ok(done.clone());
        }
        if self.status != Status::Guessed {
            return Err(Md3Error::Conflict("the agent has not guessed yet".into()));
        }
        let target = self
            .game
            .ids
            .iter()
            .position(|id| id == target_id)
            .ok_or_else(|| Md3Error::NotFound(format!("`{target_id}` is not a candidate")))?;
        let log: EpisodeLog = self.game.log(target)?;
        let result = RevealResponse {
            rank: log.rank,
            reward: log.final_reward,
            total_return: log.total_return,
            turns: log.asks,
            guess: log.guess.clone(),
        };
        self.record(&serde_json::json!({ "event": "reveal", "log": log }))?;
        self.updated = Instant::now();
        self.result = Some(result.clone());
        Ok(result)
    }

    pub fn view(&self) -> GameView {
        GameView {
            session_id: self.id.clone(),
            status: self.status,
            nlu_mode: self.agent.nlu,
            input: input_kind(self.agent.nlu).into(),
            candidates: self.cards(),
            turns: self.turns.clone(),
            result: self.result.clone(),
            created: self.created,
        }
    }

    /// Appends one event to the session's transcript file.
    pub fn record(&self, event: &serde_json::Value) -> Result<()> {
        let Some(dir) = &self.transcript else {
            return Ok(());
        };
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(dir.join(format!("{}.jsonl", self.id)))?;
        writeln!(file, "{}", serde_json::to_string(event)?)?;
        Ok(())
    }
}

pub fn input_kind(mode: NluMode) -> &'static str {
    match mode {
        NluMode::Neural => "text",
        NluMode::Oracle => "structured",
    }
}
