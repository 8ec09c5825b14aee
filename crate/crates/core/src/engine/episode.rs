use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Answer;
use crate::dst::DialogueState;
use crate::error::{Md3Error, Result};
use crate::nlu::TurnInput;
use crate::policy::{select_action, Action};

use super::agent::Agent;
use super::reward::{reward, STEP_PENALTY};
use super::user::UserSim;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopEntry {
    pub id: String,
    pub prob: f64,
}

/// Compact view of a dialogue state for logs and clients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateDigest {
    pub p: Vec<f64>,
    pub pi: Vec<f64>,
    pub turn: usize,
    pub entropy: f64,
    pub top: Vec<TopEntry>,
}

impl StateDigest {
    pub fn new(state: &DialogueState, ids: &[String], k: usize) -> Self {
        StateDigest {
            p: state.p.clone(),
            pi: state.pi.clone(),
            turn: state.turn,
            entropy: state.entropy(),
            top: state
                .top(k)
                .into_iter()
                .map(|i| TopEntry {
                    id: ids[i].clone(),
                    prob: state.p[i],
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurnLog {
    pub action: Action,
    /// Attribute name for asks, document id for the guess.
    pub subject: String,
    pub a: Vec<f64>,
    pub agent: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<Answer>,
    pub state: StateDigest,
    pub tdr: usize,
    pub cdie: f64,
    pub reward: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub seed: u64,
    pub candidates: Vec<String>,
    pub target: String,
    pub masked: Vec<bool>,
    pub turns: Vec<TurnLog>,
    pub guess: String,
    pub rank: usize,
    /// Questions asked.
    pub asks: usize,
    pub final_reward: f64,
    #[serde(rename = "return")]
    pub total_return: f64,
    /// Target rank and belief entropy, starting with the initial state.
    pub tdr: Vec<usize>,
    pub cdie: Vec<f64>,
    #[serde(default)]
    pub contradictions: usize,
}

/// One policy decision of a sampled episode, kept for the policy gradient.
#[derive(Clone, Debug)]
pub struct Step {
    pub v: Option<Vec<Vec<f64>>>,
    pub a: Vec<f64>,
    pub pi: Vec<f64>,
    pub chosen: usize,
}

#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    /// Reward after each step; the last one includes the final reward.
    pub rewards: Vec<f64>,
}

/// A candidate set: corpus indices plus the target's position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Episode {
    pub candidates: Vec<usize>,
    pub target: usize,
}

impl Episode {
    /// Draws a target and `m − 1` distractors from `pool`. For a fixed
    /// seed the candidate sets are nested across `m`.
    pub fn sample(pool: &[usize], m: usize, seed: u64) -> Result<Self> {
        if m < 2 || m > pool.len() {
            return Err(Md3Error::InvalidConfig(format!(
                "cannot draw {m} candidates from {} documents",
                pool.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = rng.gen_range(0..pool.len());
        let mut rest: Vec<usize> = pool.iter().copied().filter(|&i| i != pool[t]).collect();
        // Partial Fisher-Yates: the first k drawn never depend on m.
        for k in 0..m - 1 {
            let j = rng.gen_range(k..rest.len());
            rest.swap(k, j);
        }
        let mut candidates: Vec<usize> = rest[..m - 1].to_vec();
        let mut pos_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let target = pos_rng.gen_range(0..m);
        candidates.insert(target, pool[t]);
        Ok(Episode { candidates, target })
    }
}

/// Plays one dialogue between `agent` and a simulated user.
pub fn run_episode(
    agent: &Agent,
    episode: &Episode,
    mask_p: f64,
    seed: u64,
    sample: bool,
) -> Result<(EpisodeLog, Trajectory)> {
    let corpus = &agent.corpus;
    let m = episode.candidates.len();
    let l = agent.n_attributes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let user = UserSim::new(
        corpus.records[episode.candidates[episode.target]].clone(),
        mask_p,
        &mut rng,
    );
    let ids: Vec<String> = episode
        .candidates
        .iter()
        .map(|&i| corpus.records[i].object_id.clone())
        .collect();
    let mut state = DialogueState::new(m, l)?;
    let mut asked: Vec<usize> = Vec::new();
    let mut turns = Vec::new();
    let mut traj = Trajectory::default();
    let mut tdr = vec![state.rank(episode.target)];
    let mut cdie = vec![state.entropy()];
    let mut contradictions = 0;
    let sample_asks = sample || agent.policy.mode == crate::policy::PolicyMode::Rand;
    loop {
        let decision = agent.decide(&episode.candidates, &state.p, &state.pi, &asked)?;
        let action = select_action(&state, &decision.a, &agent.policy, sample_asks, &mut rng);
        match action {
            Action::Guess(i) => {
                let title = &corpus.records[episode.candidates[i]].title;
                let utterance = agent.templates.guess(title, &mut rng)?;
                let r = reward(state.rank(episode.target), asked.len());
                turns.push(TurnLog {
                    action,
                    subject: ids[i].clone(),
                    a: decision.a,
                    agent: utterance.join(" "),
                    user: None,
                    answer: None,
                    state: StateDigest::new(&state, &ids, 5),
                    tdr: state.rank(episode.target),
                    cdie: state.entropy(),
                    reward: r.final_reward,
                });
                match traj.rewards.last_mut() {
                    Some(last) => *last += r.final_reward,
                    None => traj.rewards.push(r.final_reward),
                }
                let rank = state.rank(episode.target);
                let log = EpisodeLog {
                    seed,
                    candidates: ids.clone(),
                    target: ids[episode.target].clone(),
                    masked: user.masked.clone(),
                    guess: ids[i].clone(),
                    rank,
                    asks: asked.len(),
                    final_reward: r.final_reward,
                    total_return: r.total,
                    tdr,
                    cdie,
                    contradictions,
                    turns,
                };
                return Ok((log, traj));
            }
            Action::Ask(j) => {
                let question = agent.templates.ask(j, &mut rng)?;
                let (response, answer) = user.respond(j, &agent.templates, &mut rng)?;
                let turn = TurnInput::new(question.clone(), response.clone());
                let beliefs = agent.understand(&episode.candidates, j, &turn, Some(&answer))?;
                traj.steps.push(Step {
                    v: decision.v,
                    a: decision.a.clone(),
                    pi: state.pi.clone(),
                    chosen: j,
                });
                traj.rewards.push(STEP_PENALTY);
                state = state.update(&beliefs)?;
                if state.contradiction {
                    contradictions += 1;
                }
                asked.push(j);
                tdr.push(state.rank(episode.target));
                cdie.push(state.entropy());
                turns.push(TurnLog {
                    action,
                    subject: corpus.schema.name(j).to_string(),
                    a: decision.a,
                    agent: question.join(" "),
                    user: Some(response.join(" ")),
                    answer: Some(answer),
                    state: StateDigest::new(&state, &ids, 5),
                    tdr: state.rank(episode.target),
                    cdie: state.entropy(),
                    reward: STEP_PENALTY,
                });
            }
        }
    }
}
