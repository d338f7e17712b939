//! Mean-aggregation message passing (GraphSAGE style) with masking.
//!
//! Each layer computes, for every unmasked node `i`,
//!
//! ```text
//! h'_i = tanh(h_i W_self + mean_{k in N(i), k unmasked} h_k W_nbr + b)
//! ```
//!
//! Masked nodes output zero rows and never contribute to a neighbor mean or
//! to the pooled vector, so their input features have no effect at all.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Matrix, Parameters};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmbeddingError {
    #[error("feature width {got} does not match encoder input width {expected}")]
    FeatureWidth { expected: usize, got: usize },
    #[error("{what}: expected {expected} entries, got {got}")]
    Length { what: &'static str, expected: usize, got: usize },
}

/// Features, neighbor lists and node mask of one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInput {
    pub features: Matrix,
    pub adjacency: Arc<Vec<Vec<usize>>>,
    /// `true` = node participates.
    pub mask: Vec<bool>,
}

impl GraphInput {
    pub fn nodes(&self) -> usize {
        self.features.rows
    }

    pub fn byte_size(&self) -> usize {
        self.features.data.len() * 8 + self.mask.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderLayer {
    pub w_self: Matrix,
    pub w_nbr: Matrix,
    pub bias: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub layers: Vec<EncoderLayer>,
}

impl EncoderParams {
    /// `n_layers` layers `d_in -> d_hidden -> ... -> d_out`, uniform init in
    /// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn new(d_in: usize, d_hidden: usize, d_out: usize, n_layers: usize, rng: &mut impl Rng) -> Self {
        assert!(n_layers >= 1);
        let layers = (0..n_layers)
            .map(|l| {
                let fan_in = if l == 0 { d_in } else { d_hidden };
                let fan_out = if l + 1 == n_layers { d_out } else { d_hidden };
                let s = 1.0 / (fan_in as f64).sqrt();
                EncoderLayer {
                    w_self: Matrix::uniform(fan_in, fan_out, s, rng),
                    w_nbr: Matrix::uniform(fan_in, fan_out, s, rng),
                    bias: Matrix::uniform(1, fan_out, s, rng),
                }
            })
            .collect();
        Self { layers }
    }

    pub fn d_in(&self) -> usize {
        self.layers[0].w_self.rows
    }

    pub fn d_out(&self) -> usize {
        self.layers.last().expect("at least one layer").w_self.cols
    }
}

impl Parameters for EncoderParams {
    fn tensors(&self) -> Vec<&Matrix> {
        self.layers.iter().flat_map(|l| [&l.w_self, &l.w_nbr, &l.bias]).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        self.layers.iter_mut().flat_map(|l| [&mut l.w_self, &mut l.w_nbr, &mut l.bias]).collect()
    }

    fn tensor_names(&self) -> Vec<String> {
        (0..self.layers.len()).flat_map(|l| [format!("layer{l}.w_self"), format!("layer{l}.w_nbr"), format!("layer{l}.bias")]).collect()
    }
}

/// Per-node embeddings and their masked mean.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub per_node: Matrix,
    pub pooled: Vec<f64>,
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct EncoderCache {
    /// `inputs[l]` is the input of layer `l`; `inputs[L]` the final output.
    inputs: Vec<Matrix>,
    /// Neighbor means fed to each layer.
    means: Vec<Matrix>,
    /// Per node: active neighbors.
    active_neighbors: Vec<Vec<usize>>,
    active: usize,
}

fn active_neighbors(input: &GraphInput) -> Vec<Vec<usize>> {
    (0..input.nodes())
        .map(|i| if input.mask[i] { input.adjacency[i].iter().copied().filter(|&k| input.mask[k]).collect() } else { Vec::new() })
        .collect()
}

fn check(input: &GraphInput, params: &EncoderParams) -> Result<(), EmbeddingError> {
    if input.features.cols != params.d_in() {
        return Err(EmbeddingError::FeatureWidth { expected: params.d_in(), got: input.features.cols });
    }
    let n = input.nodes();
    if input.mask.len() != n {
        return Err(EmbeddingError::Length { what: "node mask", expected: n, got: input.mask.len() });
    }
    if input.adjacency.len() != n {
        return Err(EmbeddingError::Length { what: "adjacency", expected: n, got: input.adjacency.len() });
    }
    Ok(())
}

/// Forward pass. See the module docs for the layer rule.
pub fn encode(input: &GraphInput, params: &EncoderParams) -> Result<Embedding, EmbeddingError> {
    encode_with_cache(input, params).map(|(e, _)| e)
}

pub fn encode_with_cache(input: &GraphInput, params: &EncoderParams) -> Result<(Embedding, EncoderCache), EmbeddingError> {
    check(input, params)?;
    let n = input.nodes();
    let nbrs = active_neighbors(input);
    let mut inputs = vec![input.features.clone()];
    let mut means = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        let h = inputs.last().expect("non-empty");
        let mut mean = Matrix::zeros(n, h.cols);
        for i in 0..n {
            if nbrs[i].is_empty() {
                continue;
            }
            let row = mean.row_mut(i);
            for &k in &nbrs[i] {
                for (m, x) in row.iter_mut().zip(h.row(k)) {
                    *m += x;
                }
            }
            let inv = 1.0 / nbrs[i].len() as f64;
            row.iter_mut().for_each(|m| *m *= inv);
        }
        let d_out = layer.w_self.cols;
        let mut out = Matrix::zeros(n, d_out);
        for i in 0..n {
            if !input.mask[i] {
                continue;
            }
            let row = out.row_mut(i);
            row.copy_from_slice(&layer.bias.data);
            layer.w_self.accumulate_vec_mul(h.row(i), row);
            layer.w_nbr.accumulate_vec_mul(mean.row(i), row);
            row.iter_mut().for_each(|x| *x = x.tanh());
        }
        means.push(mean);
        inputs.push(out);
    }
    let per_node = inputs.last().expect("non-empty").clone();
    let active = input.mask.iter().filter(|&&m| m).count();
    let mut pooled = vec![0.0; per_node.cols];
    if active > 0 {
        for i in (0..n).filter(|&i| input.mask[i]) {
            for (p, x) in pooled.iter_mut().zip(per_node.row(i)) {
                *p += x;
            }
        }
        let inv = 1.0 / active as f64;
        pooled.iter_mut().for_each(|p| *p *= inv);
    }
    Ok((Embedding { per_node, pooled }, EncoderCache { inputs, means, active_neighbors: nbrs, active }))
}

/// Backward pass: accumulates parameter gradients into `grads` given the
/// loss gradient w.r.t. the per-node embeddings and the pooled vector.
pub fn encode_backward(
    input: &GraphInput,
    params: &EncoderParams,
    cache: &EncoderCache,
    d_per_node: &Matrix,
    d_pooled: &[f64],
    grads: &mut EncoderParams,
) {
    let n = input.nodes();
    let mut d_out = d_per_node.clone();
    if cache.active > 0 {
        let inv = 1.0 / cache.active as f64;
        for i in (0..n).filter(|&i| input.mask[i]) {
            for (d, p) in d_out.row_mut(i).iter_mut().zip(d_pooled) {
                *d += p * inv;
            }
        }
    }
    for l in (0..params.layers.len()).rev() {
        let layer = &params.layers[l];
        let h_in = &cache.inputs[l];
        let h_out = &cache.inputs[l + 1];
        let mean = &cache.means[l];
        let mut d_pre = Matrix::zeros(n, layer.w_self.cols);
        for i in (0..n).filter(|&i| input.mask[i]) {
            for ((dp, &g), &y) in d_pre.row_mut(i).iter_mut().zip(d_out.row(i)).zip(h_out.row(i)) {
                *dp = g * (1.0 - y * y);
            }
        }
        let g = &mut grads.layers[l];
        let mut d_in = Matrix::zeros(n, h_in.cols);
        for i in (0..n).filter(|&i| input.mask[i]) {
            let dp = d_pre.row(i);
            g.w_self.accumulate_outer(h_in.row(i), dp);
            g.w_nbr.accumulate_outer(mean.row(i), dp);
            for (b, &x) in g.bias.data.iter_mut().zip(dp) {
                *b += x;
            }
            if l == 0 {
                continue;
            }
            layer.w_self.accumulate_mul_vec(dp, d_in.row_mut(i));
            let nbrs = &cache.active_neighbors[i];
            if !nbrs.is_empty() {
                let mut d_mean = vec![0.0; h_in.cols];
                layer.w_nbr.accumulate_mul_vec(dp, &mut d_mean);
                let inv = 1.0 / nbrs.len() as f64;
                for &k in nbrs {
                    for (d, m) in d_in.row_mut(k).iter_mut().zip(&d_mean) {
                        *d += m * inv;
                    }
                }
            }
        }
        d_out = d_in;
    }
}

/// Concatenation of pooled zone vectors in zone order.
pub fn aggregate_zones(zones: &[Embedding]) -> Result<Vec<f64>, EmbeddingError> {
    let Some(first) = zones.first() else {
        return Err(EmbeddingError::Length { what: "zone embeddings", expected: 1, got: 0 });
    };
    let width = first.pooled.len();
    let mut out = Vec::with_capacity(width * zones.len());
    for z in zones {
        if z.pooled.len() != width {
            return Err(EmbeddingError::Length { what: "pooled zone vector", expected: width, got: z.pooled.len() });
        }
        out.extend_from_slice(&z.pooled);
    }
    Ok(out)
}
