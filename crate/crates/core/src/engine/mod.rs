//! Dialogue orchestration: simulated users, rewards, training and scoring.

mod agent;
mod episode;
mod evaluate;
mod export;
mod game;
pub mod nlg;
mod reinforce;
mod replay;
mod reward;
mod user;

pub use agent::{Agent, Decision, NluMode};
pub use episode::{
    run_episode, Episode, EpisodeLog, StateDigest, Step, TopEntry, Trajectory, TurnLog,
};
pub use evaluate::{evaluate, EvalConfig, Evaluation, Metrics};
pub use export::{
    dynamics, read_episodes, write_dynamics, write_episodes, write_metrics, write_reward_curve,
};
pub use game::{Game, HumanAnswer, Reply};
pub use nlg::Templates;
pub use reinforce::{train_reinforce, CurvePoint, RlConfig, RlReport};
pub use replay::{replay, ReplayReport};
pub use reward::{discounted_returns, final_reward, reward, Reward, STEP_PENALTY, TOP_RANKS};
pub use user::UserSim;
