use serde::{Deserialize, Serialize};

use crate::corpus::{Answer, KBRecord};
use crate::error::{Md3Error, Result};
use crate::nn::softmax;

/// Beliefs extracted from a single (question, response) exchange.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurnBeliefs {
    /// Which candidate the response points at (length `M`).
    pub p_hat: Vec<f64>,
    /// `alpha * pi_tilde`: evidence that the asked attribute is unknown.
    pub pi_hat: Vec<f64>,
    pub alpha: f64,
    /// Which attribute the exchange was about (length `L`).
    pub pi_tilde: Vec<f64>,
    /// Candidate-by-attribute similarities with a trailing column of ones.
    pub s: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
}

impl TurnBeliefs {
    /// Fuses similarity scores `s_hat` (`M × L`), the attribute
    /// distribution and the unknown probability into turn beliefs.
    pub fn combine(s_hat: &[Vec<f64>], pi_tilde: Vec<f64>, alpha: f64) -> Self {
        let mut beta: Vec<f64> = pi_tilde.iter().map(|p| p * (1.0 - alpha)).collect();
        beta.push(alpha);
        let s: Vec<Vec<f64>> = s_hat
            .iter()
            .map(|row| row.iter().copied().chain(std::iter::once(1.0)).collect())
            .collect();
        let logits: Vec<f64> = s
            .iter()
            .map(|row| row.iter().zip(&beta).map(|(a, b)| a * b).sum())
            .collect();
        let p_hat = softmax(&logits);
        let pi_hat = pi_tilde.iter().map(|p| alpha * p).collect();
        TurnBeliefs {
            p_hat,
            pi_hat,
            alpha,
            pi_tilde,
            s,
            beta,
        }
    }

    /// Exact-match beliefs from a structured answer. Candidates sharing a
    /// value with the answer get equal mass; an unknown answer leaves the
    /// candidates uniform and marks the attribute as unknown.
    pub fn oracle(
        attribute: usize,
        n_attributes: usize,
        answer: &Answer,
        candidates: &[&KBRecord],
    ) -> Result<Self> {
        if attribute >= n_attributes {
            return Err(Md3Error::Schema(format!(
                "attribute index {attribute} out of range"
            )));
        }
        let m = candidates.len();
        if m == 0 {
            return Err(Md3Error::Contract("no candidates".into()));
        }
        let mut pi_tilde = vec![0.0; n_attributes];
        pi_tilde[attribute] = 1.0;
        let uniform = vec![1.0 / m as f64; m];
        let (p_hat, alpha) = match answer {
            Answer::Unknown => (uniform, 1.0),
            Answer::Values(values) => {
                let w: Vec<f64> = candidates
                    .iter()
                    .map(|r| {
                        if r.matches(attribute, values) {
                            1.0
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let total: f64 = w.iter().sum();
                if total > 0.0 {
                    (w.iter().map(|v| v / total).collect(), 0.0)
                } else {
                    (uniform, 0.0)
                }
            }
        };
        let pi_hat = pi_tilde.iter().map(|p| alpha * p).collect();
        let mut beta: Vec<f64> = pi_tilde.iter().map(|p| p * (1.0 - alpha)).collect();
        beta.push(alpha);
        let s = candidates
            .iter()
            .map(|r| {
                let mut row = vec![0.0; n_attributes + 1];
                if let Answer::Values(values) = answer {
                    if r.matches(attribute, values) {
                        row[attribute] = 1.0;
                    }
                }
                row[n_attributes] = 1.0;
                row
            })
            .collect();
        Ok(TurnBeliefs {
            p_hat,
            pi_hat,
            alpha,
            pi_tilde,
            s,
            beta,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::fixtures::four_movies;

    #[test]
    fn beta_example() {
        let b = TurnBeliefs::combine(&[vec![0.1, 0.2], vec![0.3, -0.4]], vec![0.6, 0.4], 0.5);
        let expected = [0.3, 0.2, 0.5];
        for (a, e) in b.beta.iter().zip(expected) {
            assert!((a - e).abs() < 1e-12);
        }
        assert!((b.beta.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(b.pi_hat, vec![0.3, 0.2]);
    }

    #[test]
    fn certain_unknown_gives_uniform() {
        let b = TurnBeliefs::combine(
            &[vec![5.0, -2.0], vec![-3.0, 9.0], vec![0.0, 1.0]],
            vec![0.9, 0.1],
            1.0,
        );
        for p in &b.p_hat {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_on_release_year() {
        let c = four_movies();
        let cands: Vec<&KBRecord> = c.records.iter().collect();
        let j = c.schema.index_of("release_year").unwrap();
        let b = TurnBeliefs::oracle(
            j,
            c.schema.len(),
            &Answer::Values(vec!["1994".into()]),
            &cands,
        )
        .unwrap();
        assert_eq!(b.p_hat, vec![0.5, 0.5, 0.0, 0.0]);
        assert!(b.pi_hat.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn oracle_unknown() {
        let c = four_movies();
        let cands: Vec<&KBRecord> = c.records.iter().collect();
        let b = TurnBeliefs::oracle(2, c.schema.len(), &Answer::Unknown, &cands).unwrap();
        assert_eq!(b.p_hat, vec![0.25; 4]);
        assert_eq!(b.pi_hat, vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            TurnBeliefs::oracle(6, 6, &Answer::Unknown, &cands),
            Err(Md3Error::Schema(_))
        ));
    }

    #[test]
    fn oracle_multi_valued_intersection() {
        let c = crate::corpus::fixtures::toy_corpus();
        let cands: Vec<&KBRecord> = c.records.iter().collect();
        // gamma: t0 {c0,c1}, t1 {c1}, t2 {c2}, t3 {c0}, t4 {c3,c4}, t5 {}
        let ans = Answer::Values(vec!["c1".into(), "c4".into()]);
        let b = TurnBeliefs::oracle(2, 3, &ans, &cands).unwrap();
        let third = 1.0 / 3.0;
        assert_eq!(b.p_hat, vec![third, third, 0.0, 0.0, third, 0.0]);
    }
}
