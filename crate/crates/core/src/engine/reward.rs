use serde::{Deserialize, Serialize};

/// Per-turn penalty for every question asked.
pub const STEP_PENALTY: f64 = -0.1;
/// Ranks up to this count as a success.
pub const TOP_RANKS: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reward {
    pub steps: Vec<f64>,
    pub final_reward: f64,
    /// Undiscounted sum of the step rewards and the final reward.
    pub total: f64,
}

/// Final reward for a target at `rank` (1-based).
pub fn final_reward(rank: usize, top: usize) -> f64 {
    if rank <= top {
        (2.0 * (1.0 - (rank as f64 - 1.0) / top as f64)).max(0.0)
    } else {
        -1.0
    }
}

pub fn reward(rank: usize, turns: usize) -> Reward {
    let steps = vec![STEP_PENALTY; turns];
    let final_reward = final_reward(rank, TOP_RANKS);
    let total = final_reward + STEP_PENALTY * turns as f64;
    Reward {
        steps,
        final_reward,
        total,
    }
}

/// `G_t = Σ_k γ^k r_{t+k}` for every step.
pub fn discounted_returns(rewards: &[f64], discount: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (t, r) in rewards.iter().enumerate().rev() {
        acc = r + discount * acc;
        out[t] = acc;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let r = reward(1, 3);
        assert_eq!(r.final_reward, 2.0);
        assert!((r.total - 1.7).abs() < 1e-12);
        assert!((final_reward(3, 3) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(final_reward(4, 3), -1.0);
    }

    #[test]
    fn returns_by_hand() {
        let g = discounted_returns(&[-0.1, -0.1, 1.9], 0.9);
        assert!((g[2] - 1.9).abs() < 1e-12);
        assert!((g[1] - (-0.1 + 0.9 * 1.9)).abs() < 1e-12);
        assert!((g[0] - (-0.1 + 0.9 * -0.1 + 0.81 * 1.9)).abs() < 1e-12);
    }
}
