use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::EncoderParams;
use crate::error::{check_finite, Md3Error, Result};
use crate::nn::{axpy, dot, sigmoid, softmax, softmax_backward, BiGru, BiGruTrace, Mat, Tensors};
use crate::text::Vocab;

use super::beliefs::TurnBeliefs;

/// One exchange: the agent's question and the user's reply.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnInput {
    pub question: Vec<String>,
    pub response: Vec<String>,
}

impl TurnInput {
    pub fn new(question: Vec<String>, response: Vec<String>) -> Self {
        TurnInput { question, response }
    }

    /// Token ids of `question <sep> response`.
    pub fn ids(&self, vocab: &Vocab) -> Vec<usize> {
        let mut ids = vocab.ids(&self.question);
        ids.push(vocab.sep_id());
        ids.extend(vocab.ids(&self.response));
        ids
    }
}

/// Turn encoder and the three heads. No biases: the similarity, attribute
/// and unknown scores are plain linear maps of the turn encoding `G`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NluParams {
    pub turn_rnn: BiGru,
    /// `2h × 4h` bilinear map between turn encodings and document rows.
    pub w_s: Mat,
    /// `L × 2h`.
    pub w_attr: Mat,
    /// Length `2h`.
    pub w_unk: Vec<f64>,
}

/// Forward activations kept for the backward pass.
pub struct TurnTrace {
    ids: Vec<usize>,
    rnn: BiGruTrace,
    pub g: Vec<f64>,
}

/// Gradient of the supervised loss with respect to one turn's outputs.
pub(crate) struct HeadGrads {
    pub d_g: Vec<f64>,
}

impl NluParams {
    pub fn new(embed_dim: usize, hidden: usize, n_attributes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = 2 * hidden;
        let scale = 1.0 / (g as f64).sqrt();
        NluParams {
            turn_rnn: BiGru::new(embed_dim, hidden, &mut rng),
            w_s: Mat::uniform(g, 4 * hidden, scale, &mut rng),
            w_attr: Mat::uniform(n_attributes, g, scale, &mut rng),
            w_unk: (0..g).map(|_| rng.gen_range(-scale..scale)).collect(),
        }
    }

    /// Sized to match a trained encoder.
    pub fn for_encoder(encoder: &EncoderParams, seed: u64) -> Self {
        let c = &encoder.config;
        Self::new(c.embed_dim, c.hidden, c.n_attributes, seed)
    }

    pub fn zeros_like(&self) -> Self {
        NluParams {
            turn_rnn: self.turn_rnn.zeros_like(),
            w_s: Mat::zeros(self.w_s.rows, self.w_s.cols),
            w_attr: Mat::zeros(self.w_attr.rows, self.w_attr.cols),
            w_unk: vec![0.0; self.w_unk.len()],
        }
    }

    pub fn n_attributes(&self) -> usize {
        self.w_attr.rows
    }

    pub fn rep_dim(&self) -> usize {
        self.w_s.cols
    }

    pub(crate) fn trace_turn(&self, ids: &[usize], embeddings: &Mat) -> Result<TurnTrace> {
        if ids.is_empty() {
            return Err(Md3Error::Contract("cannot encode an empty turn".into()));
        }
        if embeddings.cols != self.turn_rnn.fwd.input() {
            return Err(Md3Error::Contract(
                "embedding size does not match the turn encoder".into(),
            ));
        }
        let inputs: Vec<&[f64]> = ids.iter().map(|&i| embeddings.row(i)).collect();
        let rnn = self.turn_rnn.forward(&inputs);
        let g = rnn.final_state();
        Ok(TurnTrace {
            ids: ids.to_vec(),
            rnn,
            g,
        })
    }

    /// Final forward and backward states of the turn encoder, concatenated.
    pub fn encode_turn(&self, turn: &TurnInput, encoder: &EncoderParams) -> Result<Vec<f64>> {
        let ids = turn.ids(&encoder.vocab);
        Ok(self.trace_turn(&ids, &encoder.weights.embeddings)?.g)
    }

    fn check_reps(&self, reps: &[&[f64]]) -> Result<()> {
        if reps.len() < 2 {
            return Err(Md3Error::Contract("need at least two candidates".into()));
        }
        let want = self.n_attributes() * self.rep_dim();
        if reps.iter().any(|q| q.len() != want) {
            return Err(Md3Error::Contract(format!(
                "document representation must have {want} entries"
            )));
        }
        Ok(())
    }

    /// `Ŝ[i][j] = G · W_s · Q_ij`.
    fn similarities(&self, g: &[f64], reps: &[&[f64]]) -> Vec<Vec<f64>> {
        let v = self.w_s.matvec_t(g);
        let r = self.rep_dim();
        reps.iter()
            .map(|q| q.chunks(r).map(|row| dot(&v, row)).collect())
            .collect()
    }

    /// Turn beliefs over the candidates whose representations are `reps`.
    pub fn turn_beliefs(&self, g: &[f64], reps: &[&[f64]]) -> Result<TurnBeliefs> {
        self.check_reps(reps)?;
        if g.len() != self.w_unk.len() {
            return Err(Md3Error::Contract(
                "turn encoding has the wrong size".into(),
            ));
        }
        let s_hat = self.similarities(g, reps);
        let pi_tilde = softmax(&self.w_attr.matvec(g));
        let alpha = sigmoid(dot(&self.w_unk, g));
        let b = TurnBeliefs::combine(&s_hat, pi_tilde, alpha);
        check_finite("p_hat", &b.p_hat)?;
        Ok(b)
    }

    pub fn infer(
        &self,
        turn: &TurnInput,
        encoder: &EncoderParams,
        reps: &[&[f64]],
    ) -> Result<TurnBeliefs> {
        let g = self.encode_turn(turn, encoder)?;
        self.turn_beliefs(&g, reps)
    }

    /// Loss of one labelled turn given as token ids; accumulates the
    /// gradient into `grads` when given.
    #[allow(clippy::too_many_arguments)]
    pub fn turn_loss(
        &self,
        ids: &[usize],
        embeddings: &Mat,
        reps: &[&[f64]],
        attribute: usize,
        unknown: bool,
        target: &[f64],
        grads: Option<&mut NluParams>,
    ) -> Result<f64> {
        if attribute >= self.n_attributes() || target.len() != reps.len() {
            return Err(Md3Error::Contract(
                "label does not fit the candidates".into(),
            ));
        }
        let trace = self.trace_turn(ids, embeddings)?;
        Ok(self
            .supervised_loss(&trace, reps, attribute, unknown, target, grads, embeddings)?
            .0)
    }

    /// Supervised loss of one turn: attribute cross-entropy, unknown-flag
    /// binary cross-entropy and cross-entropy of `p_hat` against `target`
    /// (a distribution over candidates), equally weighted. Accumulates
    /// head and turn-encoder gradients into `grads` when given.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn supervised_loss(
        &self,
        trace: &TurnTrace,
        reps: &[&[f64]],
        attribute: usize,
        unknown: bool,
        target: &[f64],
        grads: Option<&mut NluParams>,
        embeddings: &Mat,
    ) -> Result<(f64, TurnBeliefs)> {
        let b = self.turn_beliefs(&trace.g, reps)?;
        let l = self.n_attributes();
        let y_unk = if unknown { 1.0 } else { 0.0 };
        let eps = 1e-12;
        let loss_attr = -(b.pi_tilde[attribute].max(eps)).ln();
        let loss_unk =
            -(y_unk * b.alpha.max(eps).ln() + (1.0 - y_unk) * (1.0 - b.alpha).max(eps).ln());
        let loss_doc: f64 = target
            .iter()
            .zip(&b.p_hat)
            .filter(|(y, _)| **y > 0.0)
            .map(|(y, p)| -y * p.max(eps).ln())
            .sum();
        let loss = loss_attr + loss_unk + loss_doc;
        let Some(grads) = grads else {
            return Ok((loss, b));
        };
        let HeadGrads { d_g } =
            self.head_backward(&trace.g, reps, &b, attribute, y_unk, target, grads);
        let inputs: Vec<&[f64]> = trace.ids.iter().map(|&i| embeddings.row(i)).collect();
        self.turn_rnn
            .backward_final(&trace.rnn, &inputs, &d_g, &mut grads.turn_rnn);
        debug_assert_eq!(b.pi_tilde.len(), l);
        Ok((loss, b))
    }

    #[allow(clippy::too_many_arguments)]
    fn head_backward(
        &self,
        g: &[f64],
        reps: &[&[f64]],
        b: &TurnBeliefs,
        attribute: usize,
        y_unk: f64,
        target: &[f64],
        grads: &mut NluParams,
    ) -> HeadGrads {
        let l = self.n_attributes();
        let r = self.rep_dim();
        let alpha = b.alpha;
        // Logits of p_hat are S·beta; with a cross-entropy target the
        // gradient is p_hat − target.
        let dl: Vec<f64> = b.p_hat.iter().zip(target).map(|(p, y)| p - y).collect();
        let mut d_beta = vec![0.0; l + 1];
        for (row, &d) in b.s.iter().zip(&dl) {
            axpy(d, row, &mut d_beta);
        }
        // d S_hat[i][j] = dl_i * beta_j, folded into Σ_ij dŜ_ij Q_ij.
        let mut q_acc = vec![0.0; r];
        for (q, &d) in reps.iter().zip(&dl) {
            for j in 0..l {
                axpy(d * b.beta[j], &q[j * r..(j + 1) * r], &mut q_acc);
            }
        }
        let mut d_pi = vec![0.0; l];
        let mut d_alpha = d_beta[l];
        for j in 0..l {
            d_pi[j] = d_beta[j] * (1.0 - alpha);
            d_alpha -= d_beta[j] * b.pi_tilde[j];
        }
        d_pi[attribute] -= 1.0 / b.pi_tilde[attribute].max(1e-12);
        let dz = softmax_backward(&b.pi_tilde, &d_pi);
        let du = d_alpha * alpha * (1.0 - alpha) + (alpha - y_unk);

        let mut d_g = self.w_s.matvec(&q_acc);
        grads.w_s.outer_acc(g, &q_acc);
        self.w_attr.matvec_t_acc(&dz, &mut d_g);
        grads.w_attr.outer_acc(&dz, g);
        axpy(du, &self.w_unk, &mut d_g);
        axpy(du, g, &mut grads.w_unk);
        HeadGrads { d_g }
    }
}

impl Tensors for NluParams {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = self.turn_rnn.tensors();
        t.push(&self.w_s.data);
        t.push(&self.w_attr.data);
        t.push(&self.w_unk);
        t
    }
    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.turn_rnn.tensors_mut();
        t.push(&mut self.w_s.data);
        t.push(&mut self.w_attr.data);
        t.push(&mut self.w_unk);
        t
    }
}
