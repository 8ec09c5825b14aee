//! Central finite-difference checks of the hand-written backward passes
//! on many small random instances.

use md3::encoder::{contrastive_loss, ContrastiveSample, EncoderConfig, EncoderParams};
use md3::nlu::NluParams;
use md3::nn::{Mat, Tensors};
use md3::text::Vocab;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-4;
const FLOOR: f64 = 1e-6;
const TOL: f64 = 1e-4;
const INSTANCES: u64 = 24;

fn get<T: Tensors>(p: &T, mut k: usize) -> f64 {
    for t in p.tensors() {
        if k < t.len() {
            return t[k];
        }
        k -= t.len();
    }
    panic!("index out of range")
}

fn set<T: Tensors>(p: &mut T, mut k: usize, v: f64) {
    for t in p.tensors_mut() {
        if k < t.len() {
            t[k] = v;
            return;
        }
        k -= t.len();
    }
    panic!("index out of range")
}

/// Largest relative error between `analytic` and central differences of
/// `loss` over every parameter of `p`.
fn worst_error<T: Tensors>(p: &mut T, analytic: &[f64], loss: impl Fn(&T) -> f64) -> f64 {
    let mut worst: f64 = 0.0;
    for (k, &a) in analytic.iter().enumerate() {
        let orig = get(p, k);
        set(p, k, orig + EPS);
        let lp = loss(p);
        set(p, k, orig - EPS);
        let lm = loss(p);
        set(p, k, orig);
        let num = (lp - lm) / (2.0 * EPS);
        worst = worst.max((num - a).abs() / (num.abs() + a.abs()).max(FLOOR));
    }
    worst
}

fn vocab(n: usize) -> Vocab {
    Vocab::from_tokens((0..n).map(|i| format!("w{i}")).collect())
}

fn random_doc(rng: &mut ChaCha8Rng, vocab_size: usize) -> Vec<Vec<usize>> {
    (0..rng.gen_range(1..=3))
        .map(|_| {
            (0..rng.gen_range(1..=4))
                .map(|_| rng.gen_range(0..vocab_size))
                .collect()
        })
        .collect()
}

#[test]
fn contrastive_loss_gradient() {
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_attributes = rng.gen_range(1..=3);
        let mut cfg = EncoderConfig::new(n_attributes);
        cfg.hidden = rng.gen_range(1..=2);
        cfg.embed_dim = rng.gen_range(2..=4);
        cfg.sentence_rnn = rng.gen_bool(0.5);
        cfg.shared_attention = rng.gen_bool(0.3);
        let v = vocab(rng.gen_range(4..=8));
        let n_docs = rng.gen_range(3..=5);
        let ids: Vec<_> = (0..n_docs).map(|_| random_doc(&mut rng, v.len())).collect();
        let mut params = EncoderParams::new(cfg, v, seed);
        let mut candidates: Vec<usize> = (1..n_docs).collect();
        candidates.shuffle(&mut rng);
        let sample = ContrastiveSample {
            attribute: rng.gen_range(0..n_attributes),
            target: 0,
            positive: rng.gen_range(0..candidates.len()),
            candidates,
        };
        let mut g = params.weights.zeros_like();
        contrastive_loss(&params, &ids, &sample, Some(&mut g));
        let analytic = g.tensors().concat();
        let config = params.config.clone();
        let vocab = params.vocab.clone();
        let worst = worst_error(&mut params.weights, &analytic, |w| {
            let p = EncoderParams {
                config: config.clone(),
                vocab: vocab.clone(),
                weights: w.clone(),
            };
            contrastive_loss(&p, &ids, &sample, None)
        });
        assert!(worst < TOL, "instance {seed}: max relative error {worst}");
    }
}

#[test]
fn nlu_loss_gradient() {
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let n_attributes = rng.gen_range(1..=3);
        let hidden = rng.gen_range(1..=2);
        let embed = rng.gen_range(2..=4);
        let vocab_size = rng.gen_range(4..=8);
        let embeddings = Mat::uniform(vocab_size, embed, 0.5, &mut rng);
        let ids: Vec<usize> = (0..rng.gen_range(1..=5))
            .map(|_| rng.gen_range(0..vocab_size))
            .collect();
        let m = rng.gen_range(2..=4);
        let reps: Vec<Vec<f64>> = (0..m)
            .map(|_| {
                (0..n_attributes * 4 * hidden)
                    .map(|_| rng.gen_range(-1.0..1.0))
                    .collect()
            })
            .collect();
        let rep_refs: Vec<&[f64]> = reps.iter().map(|r| r.as_slice()).collect();
        let mut target = vec![0.0; m];
        let hits = rng.gen_range(1..=m);
        for t in target.iter_mut().take(hits) {
            *t = 1.0 / hits as f64;
        }
        target.shuffle(&mut rng);
        let attribute = rng.gen_range(0..n_attributes);
        let unknown = rng.gen_bool(0.3);

        let mut params = NluParams::new(embed, hidden, n_attributes, seed);
        let mut g = params.zeros_like();
        params
            .turn_loss(
                &ids,
                &embeddings,
                &rep_refs,
                attribute,
                unknown,
                &target,
                Some(&mut g),
            )
            .unwrap();
        let analytic = g.tensors().concat();
        let worst = worst_error(&mut params, &analytic, |p| {
            p.turn_loss(
                &ids,
                &embeddings,
                &rep_refs,
                attribute,
                unknown,
                &target,
                None,
            )
            .unwrap()
        });
        assert!(worst < TOL, "instance {seed}: max relative error {worst}");
    }
}
