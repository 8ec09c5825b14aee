//! Dialogue-level beliefs: a distribution over candidate documents and a
//! per-attribute "unknown" level, updated turn by turn.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Md3Error, Result};
use crate::nlu::TurnBeliefs;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DialogueState {
    pub p: Vec<f64>,
    pub pi: Vec<f64>,
    pub turn: usize,
    /// Set when the last update found every candidate excluded and fell
    /// back to a uniform belief.
    #[serde(default)]
    pub contradiction: bool,
}

impl DialogueState {
    pub fn new(m: usize, n_attributes: usize) -> Result<Self> {
        if m < 2 {
            return Err(Md3Error::InvalidConfig(format!(
                "need at least two candidates, got {m}"
            )));
        }
        Ok(DialogueState {
            p: vec![1.0 / m as f64; m],
            pi: vec![0.0; n_attributes],
            turn: 0,
            contradiction: false,
        })
    }

    /// Multiplies in the turn's document evidence and adds its attribute
    /// evidence (capped at one). The receiver is left untouched.
    pub fn update(&self, beliefs: &TurnBeliefs) -> Result<Self> {
        if beliefs.p_hat.len() != self.p.len() || beliefs.pi_hat.len() != self.pi.len() {
            return Err(Md3Error::Contract(
                "turn beliefs do not match the state".into(),
            ));
        }
        check_finite("p_hat", &beliefs.p_hat)?;
        let mut p: Vec<f64> = self
            .p
            .iter()
            .zip(&beliefs.p_hat)
            .map(|(a, b)| a * b)
            .collect();
        let total: f64 = p.iter().sum();
        let contradiction = !(total > 0.0);
        if contradiction {
            warn!(
                "every candidate was excluded at turn {}; resetting the document belief",
                self.turn + 1
            );
            let m = p.len() as f64;
            p.iter_mut().for_each(|v| *v = 1.0 / m);
        } else {
            p.iter_mut().for_each(|v| *v /= total);
        }
        let pi = self
            .pi
            .iter()
            .zip(&beliefs.pi_hat)
            .map(|(a, b)| (a + b).min(1.0))
            .collect();
        Ok(DialogueState {
            p,
            pi,
            turn: self.turn + 1,
            contradiction,
        })
    }

    /// Like [`update`](Self::update) but refuses to reset a contradicted
    /// belief.
    pub fn update_strict(&self, beliefs: &TurnBeliefs) -> Result<Self> {
        let next = self.update(beliefs)?;
        if next.contradiction {
            return Err(Md3Error::DegenerateBelief(format!(
                "all candidates excluded at turn {}",
                next.turn
            )));
        }
        Ok(next)
    }

    /// Shannon entropy of the document belief in bits.
    pub fn entropy(&self) -> f64 {
        entropy_bits(&self.p)
    }

    /// 1-based rank of `target` under the document belief, ties broken by
    /// index.
    pub fn rank(&self, target: usize) -> usize {
        rank_of(&self.p, target)
    }

    /// Candidate index with the highest belief (lowest index on ties).
    pub fn best(&self) -> usize {
        crate::nn::argmax(&self.p)
    }

    /// Indices of the `k` most probable candidates, best first.
    pub fn top(&self, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.p.len()).collect();
        idx.sort_by(|&a, &b| self.p[b].total_cmp(&self.p[a]).then(a.cmp(&b)));
        idx.truncate(k);
        idx
    }
}

pub fn entropy_bits(p: &[f64]) -> f64 {
    0.0 - p
        .iter()
        .filter(|v| **v > 0.0)
        .map(|v| v * v.log2())
        .sum::<f64>()
}

pub fn rank_of(p: &[f64], target: usize) -> usize {
    let t = p[target];
    1 + p
        .iter()
        .enumerate()
        .filter(|&(i, &v)| v > t || (v == t && i < target))
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beliefs(p_hat: Vec<f64>, pi_hat: Vec<f64>) -> TurnBeliefs {
        TurnBeliefs {
            p_hat,
            pi_hat,
            alpha: 0.0,
            pi_tilde: vec![],
            s: vec![],
            beta: vec![],
        }
    }

    #[test]
    fn init() {
        let s = DialogueState::new(4, 6).unwrap();
        assert_eq!(s.p, vec![0.25; 4]);
        assert_eq!(s.pi, vec![0.0; 6]);
        assert!((s.entropy() - 2.0).abs() < 1e-12);
        assert!(matches!(
            DialogueState::new(1, 6),
            Err(Md3Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn update_arithmetic() {
        let s = DialogueState {
            p: vec![0.5, 0.25, 0.25],
            pi: vec![0.7, 0.2],
            turn: 0,
            contradiction: false,
        };
        let n = s
            .update(&beliefs(vec![0.2, 0.2, 0.6], vec![0.5, 0.3]))
            .unwrap();
        let want = [1.0 / 3.0, 1.0 / 6.0, 0.5];
        for (a, b) in n.p.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(n.pi, vec![1.0, 0.5]);
        assert_eq!(n.turn, 1);
        assert_eq!(s.turn, 0);
    }

    #[test]
    fn entropies() {
        let mut s = DialogueState::new(3, 1).unwrap();
        s.p = vec![0.5, 0.25, 0.25];
        assert!((s.entropy() - 1.5).abs() < 1e-12);
        s.p = vec![0.0, 1.0, 0.0];
        assert_eq!(s.entropy(), 0.0);
        assert!(s.entropy().is_sign_positive());
    }

    #[test]
    fn ranks() {
        let s = DialogueState::new(4, 1).unwrap();
        assert_eq!(s.rank(0), 1);
        assert_eq!(s.rank(3), 4);
        assert_eq!(rank_of(&[0.1, 0.6, 0.3], 2), 2);
    }

    #[test]
    fn contradiction_resets() {
        let mut s = DialogueState::new(2, 1).unwrap();
        s.p = vec![1.0, 0.0];
        let b = beliefs(vec![0.0, 1.0], vec![0.0]);
        let n = s.update(&b).unwrap();
        assert!(n.contradiction);
        assert_eq!(n.p, vec![0.5, 0.5]);
        assert!(matches!(
            s.update_strict(&b),
            Err(Md3Error::DegenerateBelief(_))
        ));
    }
}
