//! Local and global policies: graph encoders followed by an MLP scoring head.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::nn::{Mlp, MlpCache};
use crate::embedding::{
    encode, encode_backward, encode_with_cache, featurize_application, featurize_resources, EncoderCache, EncoderParams, GraphInput,
    Matrix, Parameters, APP_FEATURES, EMBED_DIM, ENCODER_LAYERS, RES_FEATURES,
};
use crate::harness::Environment;
use crate::model::{ComponentId, ZoneId};
use crate::placement::PlacementState;

/// Width of the hidden layer of every scoring head.
pub const HEAD_HIDDEN: usize = 32;

/// A differentiable scorer over a masked discrete action set.
pub trait Policy: Parameters + Clone + Send + Sync {
    type Obs: Clone + Send + Sync;
    type Cache;

    fn forward(&self, obs: &Self::Obs) -> (Vec<f64>, Self::Cache);

    /// Accumulates into `grads` the parameter gradient of a loss whose
    /// gradient w.r.t. the scores is `d_scores`.
    fn backward(&self, obs: &Self::Obs, cache: &Self::Cache, d_scores: &[f64], grads: &mut Self);

    fn action_mask(obs: &Self::Obs) -> &[bool];

    /// Bytes held by one stored observation.
    fn observation_bytes(obs: &Self::Obs) -> usize;

    fn scores(&self, obs: &Self::Obs) -> Vec<f64> {
        self.forward(obs).0
    }
}

/// What a local agent sees when placing `component`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalObservation {
    pub app: GraphInput,
    pub zone: GraphInput,
    pub component: ComponentId,
    /// Feasibility of each zone node, in local id order.
    pub mask: Vec<bool>,
}

/// What the global agent sees when delegating an application.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalObservation {
    pub app: GraphInput,
    pub zones: Vec<GraphInput>,
    pub mask: Vec<bool>,
}

fn app_input(env: &Environment, slot: usize, state: &PlacementState) -> GraphInput {
    let app = &env.apps[slot];
    GraphInput {
        features: featurize_application(&app.graph, state, &env.scale),
        adjacency: Arc::clone(&app.adjacency),
        mask: vec![true; app.graph.len()],
    }
}

fn zone_input(env: &Environment, zone: ZoneId, state: &PlacementState) -> GraphInput {
    let z = &env.zones[zone];
    GraphInput {
        features: featurize_resources(&env.resources, z.nodes(), state, &env.scale),
        adjacency: Arc::clone(&z.adjacency),
        mask: z.nodes().iter().map(|&g| state.available(g)).collect(),
    }
}

/// Observation of a local agent: application features under the current
/// placement, its zone's node features, and the action mask.
pub fn local_observe(
    env: &Environment,
    zone: ZoneId,
    slot: usize,
    state: &PlacementState,
    component: ComponentId,
    mask: Vec<bool>,
) -> LocalObservation {
    LocalObservation { app: app_input(env, slot, state), zone: zone_input(env, zone, state), component, mask }
}

/// Observation of the global agent before application `slot` is placed.
/// `state` carries the capacity consumed by earlier arrivals.
pub fn global_observe(env: &Environment, slot: usize, state: &PlacementState) -> GlobalObservation {
    let fresh = state.next_application(&env.apps[slot].graph);
    GlobalObservation {
        app: app_input(env, slot, &fresh),
        zones: (0..env.zone_count()).map(|z| zone_input(env, z, state)).collect(),
        mask: vec![true; env.zone_count()],
    }
}

fn new_encoders(rng: &mut impl Rng) -> (EncoderParams, EncoderParams) {
    (
        EncoderParams::new(APP_FEATURES, EMBED_DIM, EMBED_DIM, ENCODER_LAYERS, rng),
        EncoderParams::new(RES_FEATURES, EMBED_DIM, EMBED_DIM, ENCODER_LAYERS, rng),
    )
}

fn encoder_tensors<'a>(a: &'a EncoderParams, r: &'a EncoderParams, head: &'a Mlp) -> Vec<&'a Matrix> {
    let mut t = a.tensors();
    t.extend(r.tensors());
    t.extend(head.tensors());
    t
}

fn prefixed(prefix: &str, names: Vec<String>) -> impl Iterator<Item = String> + '_ {
    names.into_iter().map(move |n| format!("{prefix}.{n}"))
}

/// Scores each node of one zone for the current component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalPolicy {
    pub zone: ZoneId,
    pub app_encoder: EncoderParams,
    pub res_encoder: EncoderParams,
    pub head: Mlp,
}

pub struct LocalCache {
    app: EncoderCache,
    zone: EncoderCache,
    heads: Vec<MlpCache>,
}

impl LocalPolicy {
    pub fn new(zone: ZoneId, rng: &mut impl Rng) -> Self {
        let (app_encoder, res_encoder) = new_encoders(rng);
        let head = Mlp::new(&[4 * EMBED_DIM, HEAD_HIDDEN, 1], rng);
        Self { zone, app_encoder, res_encoder, head }
    }
}

impl Parameters for LocalPolicy {
    fn tensors(&self) -> Vec<&Matrix> {
        encoder_tensors(&self.app_encoder, &self.res_encoder, &self.head)
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut t = self.app_encoder.tensors_mut();
        t.extend(self.res_encoder.tensors_mut());
        t.extend(self.head.tensors_mut());
        t
    }

    fn tensor_names(&self) -> Vec<String> {
        prefixed("app_encoder", self.app_encoder.tensor_names())
            .chain(prefixed("res_encoder", self.res_encoder.tensor_names()))
            .chain(prefixed("head", self.head.tensor_names()))
            .collect()
    }
}

impl Policy for LocalPolicy {
    type Obs = LocalObservation;
    type Cache = LocalCache;

    fn forward(&self, obs: &LocalObservation) -> (Vec<f64>, LocalCache) {
        let (app, app_cache) = encode_with_cache(&obs.app, &self.app_encoder).expect("application features match the encoder");
        let (zone, zone_cache) = encode_with_cache(&obs.zone, &self.res_encoder).expect("resource features match the encoder");
        let mut x = Vec::with_capacity(4 * EMBED_DIM);
        x.extend_from_slice(&app.pooled);
        x.extend_from_slice(&zone.pooled);
        x.extend_from_slice(app.per_node.row(obs.component));
        x.extend_from_slice(&[0.0; EMBED_DIM]);
        let mut scores = Vec::with_capacity(obs.zone.nodes());
        let mut heads = Vec::with_capacity(obs.zone.nodes());
        for j in 0..obs.zone.nodes() {
            x[3 * EMBED_DIM..].copy_from_slice(zone.per_node.row(j));
            let (out, cache) = self.head.forward(&x);
            scores.push(out[0]);
            heads.push(cache);
        }
        (scores, LocalCache { app: app_cache, zone: zone_cache, heads })
    }

    fn backward(&self, obs: &LocalObservation, cache: &LocalCache, d_scores: &[f64], grads: &mut Self) {
        let d = EMBED_DIM;
        let mut d_app_pooled = vec![0.0; d];
        let mut d_zone_pooled = vec![0.0; d];
        let mut d_app_nodes = Matrix::zeros(obs.app.nodes(), d);
        let mut d_zone_nodes = Matrix::zeros(obs.zone.nodes(), d);
        for (j, (&ds, head_cache)) in d_scores.iter().zip(&cache.heads).enumerate() {
            if ds == 0.0 {
                continue;
            }
            let dx = self.head.backward(head_cache, &[ds], &mut grads.head);
            add(&mut d_app_pooled, &dx[..d]);
            add(&mut d_zone_pooled, &dx[d..2 * d]);
            add(d_app_nodes.row_mut(obs.component), &dx[2 * d..3 * d]);
            add(d_zone_nodes.row_mut(j), &dx[3 * d..]);
        }
        encode_backward(&obs.app, &self.app_encoder, &cache.app, &d_app_nodes, &d_app_pooled, &mut grads.app_encoder);
        encode_backward(&obs.zone, &self.res_encoder, &cache.zone, &d_zone_nodes, &d_zone_pooled, &mut grads.res_encoder);
    }

    fn action_mask(obs: &LocalObservation) -> &[bool] {
        &obs.mask
    }

    fn observation_bytes(obs: &LocalObservation) -> usize {
        obs.app.byte_size() + obs.zone.byte_size() + obs.mask.len() + 8
    }
}

fn add(acc: &mut [f64], x: &[f64]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

/// Scores each zone for delegation of the arriving application.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalPolicy {
    pub zones: usize,
    pub app_encoder: EncoderParams,
    /// Shared by every zone.
    pub res_encoder: EncoderParams,
    pub head: Mlp,
}

pub struct GlobalCache {
    app: EncoderCache,
    zones: Vec<EncoderCache>,
    head: MlpCache,
}

impl GlobalPolicy {
    pub fn new(zones: usize, rng: &mut impl Rng) -> Self {
        let (app_encoder, res_encoder) = new_encoders(rng);
        let head = Mlp::new(&[EMBED_DIM * (1 + zones), HEAD_HIDDEN, zones], rng);
        Self { zones, app_encoder, res_encoder, head }
    }

    /// The head input: application pooled embedding followed by every zone's
    /// pooled embedding in zone order.
    pub fn observation_vector(&self, obs: &GlobalObservation) -> Vec<f64> {
        let mut x = encode(&obs.app, &self.app_encoder).expect("application features match the encoder").pooled;
        for z in &obs.zones {
            x.extend(encode(z, &self.res_encoder).expect("resource features match the encoder").pooled);
        }
        x
    }
}

impl Parameters for GlobalPolicy {
    fn tensors(&self) -> Vec<&Matrix> {
        encoder_tensors(&self.app_encoder, &self.res_encoder, &self.head)
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut t = self.app_encoder.tensors_mut();
        t.extend(self.res_encoder.tensors_mut());
        t.extend(self.head.tensors_mut());
        t
    }

    fn tensor_names(&self) -> Vec<String> {
        prefixed("app_encoder", self.app_encoder.tensor_names())
            .chain(prefixed("res_encoder", self.res_encoder.tensor_names()))
            .chain(prefixed("head", self.head.tensor_names()))
            .collect()
    }
}

impl Policy for GlobalPolicy {
    type Obs = GlobalObservation;
    type Cache = GlobalCache;

    fn forward(&self, obs: &GlobalObservation) -> (Vec<f64>, GlobalCache) {
        let (app, app_cache) = encode_with_cache(&obs.app, &self.app_encoder).expect("application features match the encoder");
        let mut x = app.pooled;
        let mut zones = Vec::with_capacity(obs.zones.len());
        for z in &obs.zones {
            let (e, c) = encode_with_cache(z, &self.res_encoder).expect("resource features match the encoder");
            x.extend(e.pooled);
            zones.push(c);
        }
        let (scores, head) = self.head.forward(&x);
        (scores, GlobalCache { app: app_cache, zones, head })
    }

    fn backward(&self, obs: &GlobalObservation, cache: &GlobalCache, d_scores: &[f64], grads: &mut Self) {
        let d = EMBED_DIM;
        let dx = self.head.backward(&cache.head, d_scores, &mut grads.head);
        let app_nodes = Matrix::zeros(obs.app.nodes(), d);
        encode_backward(&obs.app, &self.app_encoder, &cache.app, &app_nodes, &dx[..d], &mut grads.app_encoder);
        for (k, (z, zc)) in obs.zones.iter().zip(&cache.zones).enumerate() {
            let nodes = Matrix::zeros(z.nodes(), d);
            let slice = &dx[d * (k + 1)..d * (k + 2)];
            encode_backward(z, &self.res_encoder, zc, &nodes, slice, &mut grads.res_encoder);
        }
    }

    fn action_mask(obs: &GlobalObservation) -> &[bool] {
        &obs.mask
    }

    fn observation_bytes(obs: &GlobalObservation) -> usize {
        obs.app.byte_size() + obs.zones.iter().map(GraphInput::byte_size).sum::<usize>() + obs.mask.len()
    }
}
