use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{sigmoid, Mat, Tensors};

/// Gated recurrent unit, gate layout `[reset; update; candidate]`.
///
/// ```text
/// r  = σ(W_ir x + b_ir + W_hr h + b_hr)
/// z  = σ(W_iz x + b_iz + W_hz h + b_hz)
/// n  = tanh(W_in x + b_in + r ∘ (W_hn h + b_hn))
/// h' = (1 − z) ∘ n + z ∘ h
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gru {
    pub w_in: Mat,
    pub w_hid: Mat,
    pub b_in: Vec<f64>,
    pub b_hid: Vec<f64>,
}

#[derive(Clone, Debug)]
struct Step {
    h_prev: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    n: Vec<f64>,
    hn: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct GruTrace {
    steps: Vec<Step>,
    pub outputs: Vec<Vec<f64>>,
}

impl Gru {
    pub fn new<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let scale = 1.0 / (hidden as f64).sqrt();
        Gru {
            w_in: Mat::uniform(3 * hidden, input, scale, rng),
            w_hid: Mat::uniform(3 * hidden, hidden, scale, rng),
            b_in: vec![0.0; 3 * hidden],
            b_hid: vec![0.0; 3 * hidden],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Gru {
            w_in: Mat::zeros(self.w_in.rows, self.w_in.cols),
            w_hid: Mat::zeros(self.w_hid.rows, self.w_hid.cols),
            b_in: vec![0.0; self.b_in.len()],
            b_hid: vec![0.0; self.b_hid.len()],
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_hid.cols
    }

    pub fn input(&self) -> usize {
        self.w_in.cols
    }

    /// Runs the cell over `inputs` from a zero initial state.
    pub fn forward(&self, inputs: &[&[f64]]) -> GruTrace {
        let h = self.hidden();
        let mut state = vec![0.0; h];
        let mut steps = Vec::with_capacity(inputs.len());
        let mut outputs = Vec::with_capacity(inputs.len());
        for x in inputs {
            let mut gi = self.b_in.clone();
            self.w_in.matvec_acc(x, &mut gi);
            let mut gh = self.b_hid.clone();
            self.w_hid.matvec_acc(&state, &mut gh);
            let r: Vec<f64> = (0..h).map(|k| sigmoid(gi[k] + gh[k])).collect();
            let z: Vec<f64> = (0..h).map(|k| sigmoid(gi[h + k] + gh[h + k])).collect();
            let hn: Vec<f64> = gh[2 * h..].to_vec();
            let n: Vec<f64> = (0..h)
                .map(|k| (gi[2 * h + k] + r[k] * hn[k]).tanh())
                .collect();
            let next: Vec<f64> = (0..h)
                .map(|k| (1.0 - z[k]) * n[k] + z[k] * state[k])
                .collect();
            steps.push(Step {
                h_prev: std::mem::replace(&mut state, next.clone()),
                r,
                z,
                n,
                hn,
            });
            outputs.push(next);
        }
        GruTrace { steps, outputs }
    }

    /// Backpropagates `d_outputs` (one gradient per output state) through
    /// the recurrence. Accumulates parameter gradients into `grad` and
    /// returns the gradient for each input.
    pub fn backward(
        &self,
        trace: &GruTrace,
        inputs: &[&[f64]],
        d_outputs: &[Vec<f64>],
        grad: &mut Gru,
    ) -> Vec<Vec<f64>> {
        let h = self.hidden();
        let mut dh = vec![0.0; h];
        let mut d_inputs = vec![Vec::new(); inputs.len()];
        let mut g_in = vec![0.0; 3 * h];
        let mut g_hid = vec![0.0; 3 * h];
        for t in (0..trace.steps.len()).rev() {
            let s = &trace.steps[t];
            for (a, b) in dh.iter_mut().zip(&d_outputs[t]) {
                *a += b;
            }
            let mut dh_prev = vec![0.0; h];
            for k in 0..h {
                let dn = dh[k] * (1.0 - s.z[k]);
                let dz = dh[k] * (s.h_prev[k] - s.n[k]);
                dh_prev[k] = dh[k] * s.z[k];
                let dn_pre = dn * (1.0 - s.n[k] * s.n[k]);
                let dr = dn_pre * s.hn[k];
                let dr_pre = dr * s.r[k] * (1.0 - s.r[k]);
                let dz_pre = dz * s.z[k] * (1.0 - s.z[k]);
                g_in[k] = dr_pre;
                g_in[h + k] = dz_pre;
                g_in[2 * h + k] = dn_pre;
                g_hid[k] = dr_pre;
                g_hid[h + k] = dz_pre;
                g_hid[2 * h + k] = dn_pre * s.r[k];
            }
            grad.w_in.outer_acc(&g_in, inputs[t]);
            grad.b_in.iter_mut().zip(&g_in).for_each(|(a, b)| *a += b);
            grad.w_hid.outer_acc(&g_hid, &s.h_prev);
            grad.b_hid.iter_mut().zip(&g_hid).for_each(|(a, b)| *a += b);
            d_inputs[t] = self.w_in.matvec_t(&g_in);
            self.w_hid.matvec_t_acc(&g_hid, &mut dh_prev);
            dh = dh_prev;
        }
        d_inputs
    }
}

impl Tensors for Gru {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![&self.w_in.data, &self.w_hid.data, &self.b_in, &self.b_hid]
    }
    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            &mut self.w_in.data,
            &mut self.w_hid.data,
            &mut self.b_in,
            &mut self.b_hid,
        ]
    }
}

/// Bidirectional GRU; output at step t is `[forward_t; backward_t]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiGru {
    pub fwd: Gru,
    pub bwd: Gru,
}

#[derive(Clone, Debug)]
pub struct BiGruTrace {
    fwd: GruTrace,
    bwd: GruTrace,
    pub outputs: Vec<Vec<f64>>,
}

impl BiGruTrace {
    /// `[last forward state; first backward state]` — each direction's
    /// final hidden state.
    pub fn final_state(&self) -> Vec<f64> {
        let f = self.fwd.outputs.last().expect("non-empty sequence");
        let b = self.bwd.outputs.last().expect("non-empty sequence");
        f.iter().chain(b).copied().collect()
    }
}

impl BiGru {
    pub fn new<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        BiGru {
            fwd: Gru::new(input, hidden, rng),
            bwd: Gru::new(input, hidden, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        BiGru {
            fwd: self.fwd.zeros_like(),
            bwd: self.bwd.zeros_like(),
        }
    }

    pub fn hidden(&self) -> usize {
        self.fwd.hidden()
    }

    pub fn forward(&self, inputs: &[&[f64]]) -> BiGruTrace {
        let fwd = self.fwd.forward(inputs);
        let rev: Vec<&[f64]> = inputs.iter().rev().copied().collect();
        let bwd = self.bwd.forward(&rev);
        let n = inputs.len();
        let outputs = (0..n)
            .map(|t| {
                fwd.outputs[t]
                    .iter()
                    .chain(&bwd.outputs[n - 1 - t])
                    .copied()
                    .collect()
            })
            .collect();
        BiGruTrace { fwd, bwd, outputs }
    }

    pub fn backward(
        &self,
        trace: &BiGruTrace,
        inputs: &[&[f64]],
        d_outputs: &[Vec<f64>],
        grad: &mut BiGru,
    ) -> Vec<Vec<f64>> {
        let h = self.hidden();
        let n = inputs.len();
        let d_fwd: Vec<Vec<f64>> = d_outputs.iter().map(|d| d[..h].to_vec()).collect();
        let d_bwd: Vec<Vec<f64>> = (0..n).map(|t| d_outputs[n - 1 - t][h..].to_vec()).collect();
        let mut dx = self.fwd.backward(&trace.fwd, inputs, &d_fwd, &mut grad.fwd);
        let rev: Vec<&[f64]> = inputs.iter().rev().copied().collect();
        let dx_rev = self.bwd.backward(&trace.bwd, &rev, &d_bwd, &mut grad.bwd);
        for t in 0..n {
            for (a, b) in dx[t].iter_mut().zip(&dx_rev[n - 1 - t]) {
                *a += b;
            }
        }
        dx
    }

    /// Gradient entry point when only [`BiGruTrace::final_state`] is used.
    pub fn backward_final(
        &self,
        trace: &BiGruTrace,
        inputs: &[&[f64]],
        d_final: &[f64],
        grad: &mut BiGru,
    ) -> Vec<Vec<f64>> {
        let h = self.hidden();
        let n = inputs.len();
        let mut d_outputs = vec![vec![0.0; 2 * h]; n];
        d_outputs[n - 1][..h].copy_from_slice(&d_final[..h]);
        d_outputs[0][h..].copy_from_slice(&d_final[h..]);
        self.backward(trace, inputs, &d_outputs, grad)
    }
}

impl Tensors for BiGru {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = self.fwd.tensors();
        t.extend(self.bwd.tensors());
        t
    }
    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.fwd.tensors_mut();
        t.extend(self.bwd.tensors_mut());
        t
    }
}
