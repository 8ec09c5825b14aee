use serde::{Deserialize, Serialize};

use crate::error::{Md3Error, Result};

use super::agent::Agent;
use super::episode::{run_episode, Episode, EpisodeLog};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(rename = "S1")]
    pub s1: f64,
    #[serde(rename = "S3")]
    pub s3: f64,
    #[serde(rename = "MRR")]
    pub mrr: f64,
    /// Mean number of questions.
    #[serde(rename = "T")]
    pub t: f64,
    /// Mean undiscounted return.
    #[serde(rename = "R")]
    pub r: f64,
    pub n_episodes: usize,
}

impl Metrics {
    pub fn from_logs(logs: &[EpisodeLog]) -> Result<Self> {
        if logs.is_empty() {
            return Err(Md3Error::InvalidConfig("no episodes to score".into()));
        }
        let n = logs.len() as f64;
        let mean = |f: &dyn Fn(&EpisodeLog) -> f64| logs.iter().map(f).sum::<f64>() / n;
        Ok(Metrics {
            s1: mean(&|l| (l.rank == 1) as u8 as f64),
            s3: mean(&|l| (l.rank <= 3) as u8 as f64),
            mrr: mean(&|l| 1.0 / l.rank as f64),
            t: mean(&|l| l.asks as f64),
            r: mean(&|l| l.total_return),
            n_episodes: logs.len(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub episodes: usize,
    pub m: usize,
    pub mask_p: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            episodes: 1000,
            m: 32,
            mask_p: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub metrics: Metrics,
    pub episodes: Vec<EpisodeLog>,
}

/// Greedy evaluation on fresh candidate sets from `pool`; episode `e` uses
/// seed `seed ^ e`, so the same seed replays the same users and sets.
pub fn evaluate(
    agent: &Agent,
    pool: &[usize],
    config: &EvalConfig,
    seed: u64,
) -> Result<Evaluation> {
    if config.episodes == 0 {
        return Err(Md3Error::InvalidConfig("episodes must be positive".into()));
    }
    let mut episodes = Vec::with_capacity(config.episodes);
    for e in 0..config.episodes {
        let ep_seed = seed ^ e as u64;
        let episode = Episode::sample(pool, config.m, ep_seed)?;
        let (log, _) = run_episode(agent, &episode, config.mask_p, ep_seed, false)?;
        episodes.push(log);
    }
    Ok(Evaluation {
        metrics: Metrics::from_logs(&episodes)?,
        episodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log(rank: usize, asks: usize) -> EpisodeLog {
        let r = super::super::reward::reward(rank, asks);
        EpisodeLog {
            seed: 0,
            candidates: vec![],
            target: String::new(),
            masked: vec![],
            turns: vec![],
            guess: String::new(),
            rank,
            asks,
            final_reward: r.final_reward,
            total_return: r.total,
            tdr: vec![],
            cdie: vec![],
            contradictions: 0,
        }
    }

    #[test]
    fn perfect_run() {
        let m = Metrics::from_logs(&[log(1, 3), log(1, 3)]).unwrap();
        assert_eq!((m.s1, m.s3, m.mrr, m.t), (1.0, 1.0, 1.0, 3.0));
        assert!((m.r - 1.7).abs() < 1e-12);
    }

    #[test]
    fn mixed_ranks() {
        let m = Metrics::from_logs(&[log(1, 1), log(2, 1), log(4, 1)]).unwrap();
        assert!((m.s1 - 1.0 / 3.0).abs() < 1e-12);
        assert!((m.s3 - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.mrr - 1.75 / 3.0).abs() < 1e-12);
        assert!(Metrics::from_logs(&[]).is_err());
    }
}
