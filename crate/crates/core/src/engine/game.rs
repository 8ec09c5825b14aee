use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Answer;
use crate::dst::{rank_of, DialogueState};
use crate::error::{Md3Error, Result};
use crate::nlu::TurnInput;
use crate::policy::{select_action, Action};
use crate::text::tokenize;

use super::agent::Agent;
use super::episode::{EpisodeLog, StateDigest, TurnLog};
use super::reward::{reward, Reward, STEP_PENALTY};

/// What a person typed, or picked from the offered values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HumanAnswer {
    Text { text: String },
    Structured { attribute: String, values: Answer },
}

/// The agent's next move.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reply {
    pub action: Action,
    pub utterance: String,
    /// Asked attribute name, or the guessed document id.
    pub subject: String,
}

/// A dialogue with an unseen target, driven one answer at a time.
#[derive(Clone, Debug)]
pub struct Game {
    pub seed: u64,
    pub candidates: Vec<usize>,
    pub ids: Vec<String>,
    pub state: DialogueState,
    pub asked: Vec<usize>,
    pub turns: Vec<TurnLog>,
    pub contradictions: usize,
    initial: StateDigest,
    pending: Option<(usize, Vec<String>)>,
    guess: Option<usize>,
    rng: ChaCha8Rng,
}

impl Game {
    pub fn start(agent: &Agent, candidates: Vec<usize>, seed: u64) -> Result<(Self, Reply)> {
        let ids: Vec<String> = candidates
            .iter()
            .map(|&i| agent.corpus.records[i].object_id.clone())
            .collect();
        let state = DialogueState::new(candidates.len(), agent.n_attributes())?;
        let mut game = Game {
            seed,
            initial: StateDigest::new(&state, &ids, 5),
            candidates,
            ids,
            state,
            asked: Vec::new(),
            turns: Vec::new(),
            contradictions: 0,
            pending: None,
            guess: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        let reply = game.next(agent)?;
        Ok((game, reply))
    }

    pub fn guess(&self) -> Option<usize> {
        self.guess
    }

    pub fn is_over(&self) -> bool {
        self.guess.is_some()
    }

    /// The attribute waiting for an answer.
    pub fn pending_attribute(&self) -> Option<usize> {
        self.pending.as_ref().map(|(j, _)| *j)
    }

    /// Reads one answer, updates the beliefs and decides the next move.
    pub fn answer(&mut self, agent: &Agent, input: &HumanAnswer) -> Result<Reply> {
        let (j, question) = self
            .pending
            .clone()
            .ok_or_else(|| Md3Error::Conflict("the agent has already guessed".into()))?;
        let (response, structured) = match input {
            HumanAnswer::Text { text } => (tokenize(text), None),
            HumanAnswer::Structured { attribute, values } => {
                if agent.corpus.schema.index_of(attribute)? != j {
                    return Err(Md3Error::Contract(format!(
                        "answer is about `{attribute}` but the question was about `{}`",
                        agent.corpus.schema.name(j)
                    )));
                }
                let values = normalize(values);
                let text = agent.templates.answer(j, &values, &mut self.rng)?;
                (text, Some(values))
            }
        };
        let turn = TurnInput::new(question.clone(), response.clone());
        let beliefs = agent.understand(&self.candidates, j, &turn, structured.as_ref())?;
        self.state = self.state.update(&beliefs)?;
        if self.state.contradiction {
            self.contradictions += 1;
        }
        self.asked.push(j);
        let last = self.turns.last_mut().expect("pending ask was logged");
        last.user = Some(response.join(" "));
        last.answer = structured;
        last.state = StateDigest::new(&self.state, &self.ids, 5);
        last.cdie = self.state.entropy();
        self.pending = None;
        self.next(agent)
    }

    fn next(&mut self, agent: &Agent) -> Result<Reply> {
        let decision =
            agent.decide(&self.candidates, &self.state.p, &self.state.pi, &self.asked)?;
        let sample = agent.policy.mode == crate::policy::PolicyMode::Rand;
        let action = select_action(
            &self.state,
            &decision.a,
            &agent.policy,
            sample,
            &mut self.rng,
        );
        let (utterance, subject) = match action {
            Action::Guess(i) => {
                let title = &agent.corpus.records[self.candidates[i]].title;
                self.guess = Some(i);
                (
                    agent.templates.guess(title, &mut self.rng)?,
                    self.ids[i].clone(),
                )
            }
            Action::Ask(j) => {
                let q = agent.templates.ask(j, &mut self.rng)?;
                self.pending = Some((j, q.clone()));
                (q, agent.corpus.schema.name(j).to_string())
            }
        };
        let utterance = utterance.join(" ");
        self.turns.push(TurnLog {
            action,
            subject: subject.clone(),
            a: decision.a,
            agent: utterance.clone(),
            user: None,
            answer: None,
            state: StateDigest::new(&self.state, &self.ids, 5),
            tdr: 0,
            cdie: self.state.entropy(),
            reward: if matches!(action, Action::Ask(_)) {
                STEP_PENALTY
            } else {
                0.0
            },
        });
        Ok(Reply {
            action,
            utterance,
            subject,
        })
    }

    /// Rank of the revealed target and the resulting reward.
    pub fn score(&self, target: usize) -> Result<(usize, Reward)> {
        if !self.is_over() {
            return Err(Md3Error::Conflict("the agent has not guessed yet".into()));
        }
        if target >= self.candidates.len() {
            return Err(Md3Error::NotFound(format!("candidate {target}")));
        }
        let rank = self.state.rank(target);
        Ok((rank, reward(rank, self.asked.len())))
    }

    /// Full log once the target is known.
    pub fn log(&self, target: usize) -> Result<EpisodeLog> {
        let (rank, r) = self.score(target)?;
        let mut turns = self.turns.clone();
        let mut tdr = vec![rank_of(&self.initial.p, target)];
        let mut cdie = vec![self.initial.entropy];
        for t in &mut turns {
            t.tdr = rank_of(&t.state.p, target);
            if matches!(t.action, Action::Ask(_)) {
                tdr.push(t.tdr);
                cdie.push(t.cdie);
            } else {
                t.reward = r.final_reward;
            }
        }
        Ok(EpisodeLog {
            seed: self.seed,
            candidates: self.ids.clone(),
            target: self.ids[target].clone(),
            masked: vec![false; self.state.pi.len()],
            turns,
            guess: self.ids[self.guess.expect("scored")].clone(),
            rank,
            asks: self.asked.len(),
            final_reward: r.final_reward,
            total_return: r.total,
            tdr,
            cdie,
            contradictions: self.contradictions,
        })
    }
}

fn normalize(answer: &Answer) -> Answer {
    match answer {
        Answer::Unknown => Answer::Unknown,
        Answer::Values(v) => {
            let mut out: Vec<String> = v
                .iter()
                .map(|s| tokenize(s).join(" "))
                .filter(|s| !s.is_empty())
                .collect();
            out.sort();
            out.dedup();
            if out.is_empty() {
                Answer::Unknown
            } else {
                Answer::Values(out)
            }
        }
    }
}
