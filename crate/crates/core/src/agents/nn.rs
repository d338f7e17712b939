use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{Matrix, Parameters};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub w: Matrix,
    pub b: Matrix,
}

/// Fully connected network, tanh on hidden layers, linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Layer inputs of one forward pass; `acts[L]` is the output.
#[derive(Debug, Clone)]
pub struct MlpCache {
    acts: Vec<Vec<f64>>,
}

impl Mlp {
    /// `sizes = [input, hidden..., output]`.
    pub fn new(sizes: &[usize], rng: &mut impl Rng) -> Self {
        assert!(sizes.len() >= 2);
        let layers = sizes
            .windows(2)
            .map(|p| {
                let s = 1.0 / (p[0] as f64).sqrt();
                Dense { w: Matrix::uniform(p[0], p[1], s, rng), b: Matrix::uniform(1, p[1], s, rng) }
            })
            .collect();
        Self { layers }
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].w.rows
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().expect("non-empty").w.cols
    }

    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, MlpCache) {
        let mut acts = vec![x.to_vec()];
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut y = layer.b.data.clone();
            layer.w.accumulate_vec_mul(&acts[l], &mut y);
            if l < last {
                y.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(y);
        }
        (acts.last().expect("output").clone(), MlpCache { acts })
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&self, cache: &MlpCache, d_out: &[f64], grads: &mut Mlp) -> Vec<f64> {
        let last = self.layers.len() - 1;
        let mut d = d_out.to_vec();
        for l in (0..self.layers.len()).rev() {
            if l < last {
                for (g, y) in d.iter_mut().zip(&cache.acts[l + 1]) {
                    *g *= 1.0 - y * y;
                }
            }
            let g = &mut grads.layers[l];
            g.w.accumulate_outer(&cache.acts[l], &d);
            for (b, x) in g.b.data.iter_mut().zip(&d) {
                *b += x;
            }
            let mut d_in = vec![0.0; cache.acts[l].len()];
            self.layers[l].w.accumulate_mul_vec(&d, &mut d_in);
            d = d_in;
        }
        d
    }
}

impl Parameters for Mlp {
    fn tensors(&self) -> Vec<&Matrix> {
        self.layers.iter().flat_map(|l| [&l.w, &l.b]).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        self.layers.iter_mut().flat_map(|l| [&mut l.w, &mut l.b]).collect()
    }

    fn tensor_names(&self) -> Vec<String> {
        (0..self.layers.len()).flat_map(|l| [format!("dense{l}.w"), format!("dense{l}.b")]).collect()
    }
}
