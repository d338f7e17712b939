use serde::{Deserialize, Serialize};

use crate::embedding::Parameters;

/// Adam over a flattened parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u32,
}

impl Adam {
    pub fn new(lr: f64, n_params: usize) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 }
    }

    /// One descent step on `params` along `grads`.
    pub fn step<P: Parameters>(&mut self, params: &mut P, grads: &P) {
        let g = grads.flatten();
        let mut p = params.flatten();
        assert_eq!(g.len(), self.m.len(), "optimizer sized for a different model");
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for k in 0..p.len() {
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g[k];
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g[k] * g[k];
            let m_hat = self.m[k] / c1;
            let v_hat = self.v[k] / c2;
            p[k] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        params.set_flat(&p);
    }
}

/// Euclidean norm over every tensor.
pub fn global_norm<P: Parameters>(grads: &P) -> f64 {
    grads.tensors().iter().flat_map(|t| t.data.iter()).map(|x| x * x).sum::<f64>().sqrt()
}

/// Rescales `grads` to norm `max_norm` when larger; returns the norm before
/// clipping. A non-positive `max_norm` disables clipping.
pub fn clip_grad_norm<P: Parameters>(grads: &mut P, max_norm: f64) -> f64 {
    let norm = global_norm(grads);
    if max_norm > 0.0 && norm > max_norm {
        let s = max_norm / norm;
        for t in grads.tensors_mut() {
            t.data.iter_mut().for_each(|x| *x *= s);
        }
    }
    norm
}
