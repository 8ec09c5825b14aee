//! Attribute selection and the guess decision.
//!
//! The learned policy scores attributes by how much the believed
//! candidates deviate from the corpus on each attribute, discounted by how
//! likely the user is not to know it. Baselines ask at random, in a fixed
//! order, or by exact entropy over the structured records.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{entropy_of, KBRecord};
use crate::dst::DialogueState;
use crate::error::{Md3Error, Result};
use crate::nn::{argmax, dot, softmax};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyMode {
    #[serde(rename = "dapo")]
    Dapo,
    /// Uncertainty replaced by ones.
    #[serde(rename = "dapo_no_AU", alias = "dapo_no_au")]
    DapoNoAu,
    /// Attribute belief ignored.
    #[serde(rename = "dapo_no_AB", alias = "dapo_no_ab")]
    DapoNoAb,
    #[serde(rename = "rand")]
    Rand,
    #[serde(rename = "fixed")]
    Fixed,
    #[serde(rename = "oracle")]
    Oracle,
}

impl PolicyMode {
    pub const ALL: [PolicyMode; 6] = [
        PolicyMode::Dapo,
        PolicyMode::DapoNoAu,
        PolicyMode::DapoNoAb,
        PolicyMode::Rand,
        PolicyMode::Fixed,
        PolicyMode::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyMode::Dapo => "dapo",
            PolicyMode::DapoNoAu => "dapo_no_AU",
            PolicyMode::DapoNoAb => "dapo_no_AB",
            PolicyMode::Rand => "rand",
            PolicyMode::Fixed => "fixed",
            PolicyMode::Oracle => "oracle",
        }
    }

    /// Whether the mode reads the learned projection.
    pub fn uses_projection(self) -> bool {
        matches!(self, PolicyMode::Dapo | PolicyMode::DapoNoAb)
    }
}

impl std::str::FromStr for PolicyMode {
    type Err = Md3Error;
    fn from_str(s: &str) -> Result<Self> {
        PolicyMode::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Md3Error::InvalidConfig(format!("unknown policy mode `{s}`")))
    }
}

impl std::fmt::Display for PolicyMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub mode: PolicyMode,
    /// Guess as soon as the top document belief exceeds this.
    #[serde(rename = "K")]
    pub k: f64,
    pub max_turns: usize,
    /// Attribute order for the fixed baseline; schema order when empty.
    pub fixed_order: Vec<usize>,
    /// Sample asked attributes instead of taking the argmax.
    pub sample: bool,
    pub temperature: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            mode: PolicyMode::Dapo,
            k: 0.5,
            max_turns: 5,
            fixed_order: Vec::new(),
            sample: false,
            temperature: 1.0,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self, n_attributes: usize) -> Result<()> {
        if !(self.k > 0.0 && self.k < 1.0) {
            return Err(Md3Error::InvalidConfig(format!(
                "K must lie in (0, 1), got {}",
                self.k
            )));
        }
        if self.max_turns == 0 {
            return Err(Md3Error::InvalidConfig(
                "max_turns must be at least 1".into(),
            ));
        }
        if !(self.temperature > 0.0) {
            return Err(Md3Error::InvalidConfig(
                "temperature must be positive".into(),
            ));
        }
        if !self.fixed_order.is_empty() {
            let mut sorted = self.fixed_order.clone();
            sorted.sort_unstable();
            if sorted != (0..n_attributes).collect::<Vec<_>>() {
                return Err(Md3Error::InvalidConfig(
                    "fixed_order must be a permutation of the attributes".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn order(&self, n_attributes: usize) -> Vec<usize> {
        if self.fixed_order.is_empty() {
            (0..n_attributes).collect()
        } else {
            self.fixed_order.clone()
        }
    }
}

/// The learned projection from differentiated representations to a
/// per-attribute uncertainty score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub w_diff: Vec<f64>,
}

impl PolicyParams {
    pub fn new(rep_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (rep_dim as f64).sqrt();
        PolicyParams {
            w_diff: (0..rep_dim).map(|_| rng.gen_range(-scale..scale)).collect(),
        }
    }
}

impl crate::nn::Tensors for PolicyParams {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![&self.w_diff]
    }
    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.w_diff]
    }
}

/// Belief-weighted differentiated representation, one row per attribute:
/// `v_j = Σ_i p_i · Qdiff_ij`.
pub fn weighted_diff(q_diff: &[&[f64]], p: &[f64], n_attributes: usize) -> Result<Vec<Vec<f64>>> {
    if q_diff.len() != p.len() || q_diff.is_empty() {
        return Err(Md3Error::Contract(
            "one representation per candidate is required".into(),
        ));
    }
    let width = q_diff[0].len();
    if !width.is_multiple_of(n_attributes) || q_diff.iter().any(|q| q.len() != width) {
        return Err(Md3Error::Contract(
            "representation width does not split into attributes".into(),
        ));
    }
    let r = width / n_attributes;
    let mut v = vec![vec![0.0; r]; n_attributes];
    for (q, &w) in q_diff.iter().zip(p) {
        if w == 0.0 {
            continue;
        }
        for (j, row) in v.iter_mut().enumerate() {
            crate::nn::axpy(w, &q[j * r..(j + 1) * r], row);
        }
    }
    Ok(v)
}

/// `γ_j = v_j · w_diff`.
pub fn attribute_uncertainty(
    q_diff: &[&[f64]],
    p: &[f64],
    params: &PolicyParams,
    n_attributes: usize,
) -> Result<Vec<f64>> {
    let v = weighted_diff(q_diff, p, n_attributes)?;
    if v[0].len() != params.w_diff.len() {
        return Err(Md3Error::Contract(
            "projection size does not match representations".into(),
        ));
    }
    Ok(v.iter().map(|row| dot(row, &params.w_diff)).collect())
}

/// Ask distribution for the representation-based modes and the two naive
/// baselines. `asked` lists attributes asked so far (for the fixed order).
pub fn ask_distribution(
    mode: PolicyMode,
    gamma: &[f64],
    pi: &[f64],
    asked: &[usize],
    order: &[usize],
) -> Vec<f64> {
    let l = pi.len();
    match mode {
        PolicyMode::Dapo => softmax(
            &gamma
                .iter()
                .zip(pi)
                .map(|(g, p)| g * (1.0 - p))
                .collect::<Vec<_>>(),
        ),
        PolicyMode::DapoNoAu => softmax(&pi.iter().map(|p| 1.0 - p).collect::<Vec<_>>()),
        PolicyMode::DapoNoAb => softmax(gamma),
        PolicyMode::Rand => vec![1.0 / l as f64; l],
        PolicyMode::Fixed => {
            let next = order
                .iter()
                .copied()
                .find(|j| !asked.contains(j))
                .unwrap_or(order[asked.len() % order.len()]);
            let mut a = vec![0.0; l];
            a[next] = 1.0;
            a
        }
        PolicyMode::Oracle => vec![1.0 / l as f64; l],
    }
}

/// Entropy-driven ask distribution over the structured records of the
/// candidates that keep at least half the uniform belief.
pub fn oracle_distribution(candidates: &[&KBRecord], p: &[f64], pi: &[f64]) -> Vec<f64> {
    let l = pi.len();
    let m = candidates.len();
    let threshold = 1.0 / (2.0 * m as f64);
    let mut kept: Vec<&KBRecord> = candidates
        .iter()
        .zip(p)
        .filter(|(_, &w)| w > threshold)
        .map(|(r, _)| *r)
        .collect();
    if kept.is_empty() {
        kept = candidates.to_vec();
    }
    let gamma: Vec<f64> = (0..l).map(|j| entropy_of(&kept, j)).collect();
    let total: f64 = gamma.iter().sum();
    let uniform = vec![1.0 / l as f64; l];
    if total <= 0.0 {
        return uniform;
    }
    let a: Vec<f64> = gamma
        .iter()
        .zip(pi)
        .map(|(g, q)| g / total * (1.0 - q))
        .collect();
    let s: f64 = a.iter().sum();
    if s <= 0.0 {
        return uniform;
    }
    a.iter().map(|v| v / s).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "lowercase")]
pub enum Action {
    Ask(usize),
    Guess(usize),
}

/// Guess when confident or out of turns, otherwise ask. Sampling draws the
/// attribute from `a` (sharpened or flattened by `temperature`).
pub fn select_action<R: Rng>(
    state: &DialogueState,
    a: &[f64],
    config: &PolicyConfig,
    sample: bool,
    rng: &mut R,
) -> Action {
    let best = state.best();
    if state.p[best] > config.k || state.turn >= config.max_turns {
        return Action::Guess(best);
    }
    if !sample {
        return Action::Ask(argmax(a));
    }
    let weights: Vec<f64> = if config.temperature == 1.0 {
        a.to_vec()
    } else {
        let logits: Vec<f64> = a
            .iter()
            .map(|v| v.max(1e-300).ln() / config.temperature)
            .collect();
        softmax(&logits)
    };
    match WeightedIndex::new(&weights) {
        Ok(dist) => Action::Ask(dist.sample(rng)),
        Err(_) => Action::Ask(argmax(a)),
    }
}

/// Gradient of `ln a[j]` with respect to the projection, for the modes
/// that use it.
pub fn log_prob_grad(
    mode: PolicyMode,
    v: &[Vec<f64>],
    a: &[f64],
    pi: &[f64],
    j: usize,
) -> Option<Vec<f64>> {
    let factor = |k: usize| match mode {
        PolicyMode::Dapo => 1.0 - pi[k],
        PolicyMode::DapoNoAb => 1.0,
        _ => 0.0,
    };
    if !mode.uses_projection() {
        return None;
    }
    let mut g = vec![0.0; v[0].len()];
    for (k, row) in v.iter().enumerate() {
        let coef = (if k == j { 1.0 } else { 0.0 } - a[k]) * factor(k);
        crate::nn::axpy(coef, row, &mut g);
    }
    Some(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::fixtures::four_movies;

    #[test]
    fn ask_distribution_example() {
        let a = ask_distribution(PolicyMode::Dapo, &[1.0, 2.0], &[0.0, 1.0], &[], &[0, 1]);
        assert!((a[0] - 0.7310585786300049).abs() < 1e-12);
        let u = ask_distribution(
            PolicyMode::Dapo,
            &[3.0, -1.0, 2.0],
            &[1.0; 3],
            &[],
            &[0, 1, 2],
        );
        assert!(u.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-12));
        let r = ask_distribution(PolicyMode::Rand, &[0.0; 6], &[0.0; 6], &[], &[]);
        assert_eq!(r, vec![1.0 / 6.0; 6]);
    }

    #[test]
    fn fixed_order_skips_asked() {
        let a = ask_distribution(PolicyMode::Fixed, &[0.0; 3], &[0.0; 3], &[2], &[2, 0, 1]);
        assert_eq!(a, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn guess_precedence() {
        let cfg = PolicyConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = DialogueState::new(2, 2).unwrap();
        s.p = vec![0.6, 0.4];
        assert_eq!(
            select_action(&s, &[1.0, 0.0], &cfg, false, &mut rng),
            Action::Guess(0)
        );
        s.p = vec![0.5, 0.5];
        assert_eq!(
            select_action(&s, &[0.0, 1.0], &cfg, false, &mut rng),
            Action::Ask(1)
        );
        s.turn = 5;
        assert_eq!(
            select_action(&s, &[0.0, 1.0], &cfg, false, &mut rng),
            Action::Guess(0)
        );
    }

    #[test]
    fn oracle_picks_release_year_on_four_movies() {
        let c = four_movies();
        let recs: Vec<&KBRecord> = c.records.iter().collect();
        let a = oracle_distribution(&recs, &[0.25; 4], &[0.0; 6]);
        assert_eq!(argmax(&a), c.schema.index_of("release_year").unwrap());
    }

    #[test]
    fn uncertainty_one_hot_belief() {
        let q0 = [1.0, 2.0, 3.0, 4.0];
        let q1 = [0.5, 0.5, 0.5, 0.5];
        let v = weighted_diff(&[&q0, &q1], &[1.0, 0.0], 2).unwrap();
        assert_eq!(v, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let g = attribute_uncertainty(
            &[&q0, &q1],
            &[1.0, 0.0],
            &PolicyParams {
                w_diff: vec![1.0, -1.0],
            },
            2,
        )
        .unwrap();
        assert_eq!(g, vec![-1.0, -1.0]);
    }

    #[test]
    fn mode_names_round_trip() {
        for m in PolicyMode::ALL {
            assert_eq!(m.name().parse::<PolicyMode>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(serde_json::from_str::<PolicyMode>(&json).unwrap(), m);
        }
    }
}
