use std::sync::{Arc, OnceLock};

use md3::corpus::{AttributeSchema, Corpus};
use md3::dst::DialogueState;
use md3::engine::{run_episode, Agent, Episode};
use md3::nlu::TurnBeliefs;
use md3::policy::{PolicyConfig, PolicyMode};
use proptest::prelude::*;

fn movies() -> Arc<Corpus> {
    static CORPUS: OnceLock<Arc<Corpus>> = OnceLock::new();
    CORPUS
        .get_or_init(|| Arc::new(Corpus::generate(AttributeSchema::movie(), 200, 11).unwrap()))
        .clone()
}

/// Turn evidence with some exact zeros in `p_hat`.
fn turn_beliefs(m: usize, l: usize) -> impl Strategy<Value = TurnBeliefs> {
    (
        prop::collection::vec(prop_oneof![Just(0.0), 0.01f64..1.0], m),
        prop::collection::vec(0.0f64..0.6, l),
    )
        .prop_map(|(mut w, pi_hat)| {
            if w.iter().all(|v| *v == 0.0) {
                w[0] = 1.0;
            }
            let z: f64 = w.iter().sum();
            let p_hat: Vec<f64> = w.iter().map(|v| v / z).collect();
            TurnBeliefs {
                p_hat,
                pi_hat,
                alpha: 0.0,
                pi_tilde: Vec::new(),
                s: Vec::new(),
                beta: Vec::new(),
            }
        })
}

fn updates() -> impl Strategy<Value = (usize, usize, Vec<TurnBeliefs>)> {
    (2usize..8, 1usize..7).prop_flat_map(|(m, l)| {
        (
            Just(m),
            Just(l),
            prop::collection::vec(turn_beliefs(m, l), 1..6),
        )
    })
}

fn on_simplex(p: &[f64]) -> bool {
    p.iter().all(|v| (0.0..=1.0).contains(v)) && (p.iter().sum::<f64>() - 1.0).abs() < 1e-9
}

proptest! {
    #[test]
    fn document_belief_stays_on_simplex((m, l, turns) in updates()) {
        let mut s = DialogueState::new(m, l).unwrap();
        for b in &turns {
            s = s.update(b).unwrap();
            prop_assert!(on_simplex(&s.p));
        }
    }

    #[test]
    fn excluded_candidates_stay_excluded((m, l, turns) in updates()) {
        let mut s = DialogueState::new(m, l).unwrap();
        for b in &turns {
            let next = s.update(b).unwrap();
            if !next.contradiction {
                for i in 0..m {
                    if s.p[i] == 0.0 {
                        prop_assert_eq!(next.p[i], 0.0);
                    }
                }
            }
            s = next;
        }
    }

    #[test]
    fn attribute_belief_is_monotone_and_capped((m, l, turns) in updates()) {
        let mut s = DialogueState::new(m, l).unwrap();
        for b in &turns {
            let next = s.update(b).unwrap();
            for j in 0..l {
                prop_assert!(next.pi[j] >= s.pi[j]);
                prop_assert!(next.pi[j] <= 1.0);
            }
            s = next;
        }
    }

    #[test]
    fn certain_unknown_gives_uniform_evidence(
        s_hat in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 2..9),
        raw in prop::collection::vec(0.01f64..1.0, 3),
    ) {
        let z: f64 = raw.iter().sum();
        let pi_tilde: Vec<f64> = raw.iter().map(|v| v / z).collect();
        let b = TurnBeliefs::combine(&s_hat, pi_tilde.clone(), 1.0);
        let m = s_hat.len() as f64;
        for p in &b.p_hat {
            prop_assert!((p - 1.0 / m).abs() < 1e-12);
        }
        for (h, t) in b.pi_hat.iter().zip(&pi_tilde) {
            prop_assert!((h - t).abs() < 1e-12);
        }
    }

    #[test]
    fn mixing_weights_sum_to_one(
        s_hat in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 4), 2..9),
        raw in prop::collection::vec(0.01f64..1.0, 4),
        alpha in 0.0f64..=1.0,
    ) {
        let z: f64 = raw.iter().sum();
        let pi_tilde: Vec<f64> = raw.iter().map(|v| v / z).collect();
        let b = TurnBeliefs::combine(&s_hat, pi_tilde, alpha);
        prop_assert_eq!(b.beta.len(), 5);
        prop_assert!((b.beta.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(on_simplex(&b.p_hat));
        prop_assert!((b.pi_hat.iter().sum::<f64>() - alpha).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// With exact matching, truthful answers only shrink a uniform support,
    /// so entropy and the target's rank can never go up.
    #[test]
    fn oracle_stack_never_loses_ground(
        seed in any::<u64>(),
        m in 2usize..40,
        mask_p in 0.0f64..0.5,
        mode in prop::sample::select(vec![PolicyMode::Oracle, PolicyMode::Fixed, PolicyMode::Rand]),
    ) {
        let corpus = movies();
        let pool: Vec<usize> = (0..corpus.len()).collect();
        let policy = PolicyConfig { mode, ..PolicyConfig::default() };
        let agent = Agent::oracle(corpus, policy).unwrap();
        let ep = Episode::sample(&pool, m, seed).unwrap();
        let (log, _) = run_episode(&agent, &ep, mask_p, seed, false).unwrap();
        prop_assert_eq!(log.contradictions, 0);
        for w in log.cdie.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12, "entropy rose: {:?}", log.cdie);
        }
        for w in log.tdr.windows(2) {
            prop_assert!(w[1] <= w[0], "rank rose: {:?}", log.tdr);
        }
        prop_assert!(log.turns.len() <= agent.policy.max_turns + 1);
    }
}
