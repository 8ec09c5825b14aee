use std::collections::VecDeque;

use log::info;
use serde::{Deserialize, Serialize};

use crate::error::{Md3Error, Result};
use crate::nn::{Adam, Tensors};
use crate::policy::{log_prob_grad, PolicyParams};

use super::agent::Agent;
use super::episode::{run_episode, Episode, EpisodeLog};
use super::reward::discounted_returns;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RlConfig {
    pub episodes: usize,
    pub m: usize,
    pub discount: f64,
    pub lr: f64,
    /// Subtract a moving average of recent returns (per step index).
    pub baseline: bool,
    pub baseline_window: usize,
    pub mask_p: f64,
    /// Episodes per reward-curve point.
    pub curve_every: usize,
}

impl Default for RlConfig {
    fn default() -> Self {
        RlConfig {
            episodes: 5000,
            m: 32,
            discount: 0.9,
            lr: 1e-2,
            baseline: true,
            baseline_window: 100,
            mask_p: 0.1,
            curve_every: 100,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub episode: usize,
    pub mean_return: f64,
    pub success: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RlReport {
    /// Undiscounted return of every training episode.
    pub returns: Vec<f64>,
    pub curve: Vec<CurvePoint>,
}

impl RlReport {
    /// Mean return over the first and the last `fraction` of episodes.
    pub fn improvement(&self, fraction: f64) -> (f64, f64) {
        let n = ((self.returns.len() as f64) * fraction).ceil().max(1.0) as usize;
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len().max(1) as f64;
        let n = n.min(self.returns.len());
        (
            mean(&self.returns[..n]),
            mean(&self.returns[self.returns.len() - n..]),
        )
    }
}

/// Policy-gradient training of the projection on sampled dialogues over
/// `pool`. Episode `e` uses seed `seed ^ e`.
pub fn train_reinforce(
    agent: &mut Agent,
    pool: &[usize],
    config: &RlConfig,
    seed: u64,
) -> Result<RlReport> {
    if !agent.policy.mode.uses_projection() {
        return Err(Md3Error::InvalidConfig(format!(
            "policy `{}` has nothing to train",
            agent.policy.mode
        )));
    }
    if !(0.0..=1.0).contains(&config.discount) || !(config.lr >= 0.0) {
        return Err(Md3Error::InvalidConfig(
            "bad discount or learning rate".into(),
        ));
    }
    let mut params: PolicyParams = agent
        .policy_params
        .clone()
        .ok_or_else(|| Md3Error::InvalidConfig("no policy parameters to train".into()))?;
    let mut adam = Adam::new(&params, config.lr);
    let mut history: Vec<VecDeque<f64>> = Vec::new();
    let mut report = RlReport::default();
    let mut window: Vec<EpisodeLog> = Vec::new();
    for e in 0..config.episodes {
        let ep_seed = seed ^ e as u64;
        let episode = Episode::sample(pool, config.m, ep_seed)?;
        agent.policy_params = Some(params.clone());
        let (log, traj) = run_episode(agent, &episode, config.mask_p, ep_seed, true)?;
        let returns = discounted_returns(&traj.rewards, config.discount);
        let mut grad = PolicyParams {
            w_diff: vec![0.0; params.w_diff.len()],
        };
        for (t, (step, g_t)) in traj.steps.iter().zip(&returns).enumerate() {
            if history.len() <= t {
                history.push(VecDeque::new());
            }
            let b = if config.baseline && !history[t].is_empty() {
                history[t].iter().sum::<f64>() / history[t].len() as f64
            } else {
                0.0
            };
            let Some(v) = &step.v else { continue };
            let Some(g) = log_prob_grad(agent.policy.mode, v, &step.a, &step.pi, step.chosen)
            else {
                continue;
            };
            // Adam minimises, so feed the negated ascent direction.
            crate::nn::axpy(-(g_t - b), &g, &mut grad.w_diff);
            history[t].push_back(*g_t);
            if history[t].len() > config.baseline_window {
                history[t].pop_front();
            }
        }
        if !grad.all_finite() {
            return Err(Md3Error::Numeric {
                tensor: format!(
                    "policy gradient (episode {e}: {})",
                    serde_json::to_string(&log)?
                ),
            });
        }
        adam.step(&mut params, &grad);
        report.returns.push(log.total_return);
        window.push(log);
        if window.len() == config.curve_every.max(1) || e + 1 == config.episodes {
            let n = window.len() as f64;
            let point = CurvePoint {
                episode: e + 1,
                mean_return: window.iter().map(|l| l.total_return).sum::<f64>() / n,
                success: window.iter().filter(|l| l.rank == 1).count() as f64 / n,
            };
            if point.episode.is_multiple_of(1000) {
                info!(
                    "rl episode {}: mean return {:.3}, success {:.3}",
                    point.episode, point.mean_return, point.success
                );
            }
            report.curve.push(point);
            window.clear();
        }
    }
    agent.policy_params = Some(params);
    Ok(report)
}
