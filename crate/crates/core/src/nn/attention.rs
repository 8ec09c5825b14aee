use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{dot, softmax, softmax_backward, Mat, Tensors};

/// Additive attention pooling with one query per attribute:
/// `u_t = tanh(P h_t + b)`, `α = softmax(u_t · q_j)`, `out = Σ α_t h_t`.
/// The projection is shared across queries; only the queries are indexed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionPool {
    pub proj: Mat,
    pub bias: Vec<f64>,
    pub queries: Mat,
}

/// Query-independent projections of a sequence, reusable across queries.
#[derive(Clone, Debug)]
pub struct Projected {
    pub u: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct PoolTrace {
    pub query: usize,
    pub alpha: Vec<f64>,
    pub output: Vec<f64>,
}

impl AttentionPool {
    pub fn new<R: Rng>(dim: usize, n_queries: usize, rng: &mut R) -> Self {
        let scale = 1.0 / (dim as f64).sqrt();
        AttentionPool {
            proj: Mat::uniform(dim, dim, scale, rng),
            bias: vec![0.0; dim],
            queries: Mat::uniform(n_queries, dim, scale, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        AttentionPool {
            proj: Mat::zeros(self.proj.rows, self.proj.cols),
            bias: vec![0.0; self.bias.len()],
            queries: Mat::zeros(self.queries.rows, self.queries.cols),
        }
    }

    pub fn project(&self, hs: &[Vec<f64>]) -> Projected {
        let u = hs
            .iter()
            .map(|h| {
                let mut pre = self.bias.clone();
                self.proj.matvec_acc(h, &mut pre);
                pre.iter_mut().for_each(|v| *v = v.tanh());
                pre
            })
            .collect();
        Projected { u }
    }

    pub fn pool(&self, hs: &[Vec<f64>], projected: &Projected, query: usize) -> PoolTrace {
        let q = self.queries.row(query);
        let scores: Vec<f64> = projected.u.iter().map(|u| dot(u, q)).collect();
        let alpha = softmax(&scores);
        let mut output = vec![0.0; hs[0].len()];
        for (a, h) in alpha.iter().zip(hs) {
            super::axpy(*a, h, &mut output);
        }
        PoolTrace {
            query,
            alpha,
            output,
        }
    }

    /// Returns the gradient for every pooled input `h_t`.
    pub fn backward(
        &self,
        hs: &[Vec<f64>],
        projected: &Projected,
        trace: &PoolTrace,
        d_out: &[f64],
        grad: &mut AttentionPool,
    ) -> Vec<Vec<f64>> {
        let q = self.queries.row(trace.query);
        let d_alpha: Vec<f64> = hs.iter().map(|h| dot(d_out, h)).collect();
        let d_scores = softmax_backward(&trace.alpha, &d_alpha);
        let mut d_hs: Vec<Vec<f64>> = trace
            .alpha
            .iter()
            .map(|a| d_out.iter().map(|d| a * d).collect())
            .collect();
        for (t, h) in hs.iter().enumerate() {
            let ds = d_scores[t];
            if ds == 0.0 {
                continue;
            }
            let u = &projected.u[t];
            super::axpy(ds, u, grad.queries.row_mut(trace.query));
            let d_pre: Vec<f64> = u
                .iter()
                .zip(q)
                .map(|(u, q)| ds * q * (1.0 - u * u))
                .collect();
            grad.proj.outer_acc(&d_pre, h);
            grad.bias.iter_mut().zip(&d_pre).for_each(|(a, b)| *a += b);
            self.proj.matvec_t_acc(&d_pre, &mut d_hs[t]);
        }
        d_hs
    }
}

impl Tensors for AttentionPool {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![&self.proj.data, &self.bias, &self.queries.data]
    }
    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.proj.data, &mut self.bias, &mut self.queries.data]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn loss(pool: &AttentionPool, hs: &[Vec<f64>], w: &[f64], q: usize) -> f64 {
        let p = pool.project(hs);
        dot(&pool.pool(hs, &p, q).output, w)
    }

    #[test]
    fn single_item_pool_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pool = AttentionPool::new(3, 2, &mut rng);
        let hs = vec![vec![0.5, -1.0, 2.0]];
        let p = pool.project(&hs);
        assert_eq!(pool.pool(&hs, &p, 1).output, hs[0]);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pool = AttentionPool::new(3, 2, &mut rng);
        let hs: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let w = vec![0.3, -0.7, 1.1];
        let p = pool.project(&hs);
        let tr = pool.pool(&hs, &p, 1);
        let mut grad = pool.zeros_like();
        let d_hs = pool.backward(&hs, &p, &tr, &w, &mut grad);
        let h = 1e-6;
        let analytic: Vec<f64> = grad.tensors().iter().flat_map(|t| t.to_vec()).collect();
        let mut probe = pool.clone();
        let mut idx = 0;
        for ti in 0..3 {
            for k in 0..probe.tensors()[ti].len() {
                let orig = probe.tensors()[ti][k];
                probe.tensors_mut()[ti][k] = orig + h;
                let up = loss(&probe, &hs, &w, 1);
                probe.tensors_mut()[ti][k] = orig - h;
                let down = loss(&probe, &hs, &w, 1);
                probe.tensors_mut()[ti][k] = orig;
                assert!(((up - down) / (2.0 * h) - analytic[idx]).abs() < 1e-7);
                idx += 1;
            }
        }
        for t in 0..4 {
            for k in 0..3 {
                let mut hp = hs.clone();
                hp[t][k] += h;
                let up = loss(&pool, &hp, &w, 1);
                hp[t][k] -= 2.0 * h;
                let down = loss(&pool, &hp, &w, 1);
                assert!(((up - down) / (2.0 * h) - d_hs[t][k]).abs() < 1e-7);
            }
        }
    }
}
