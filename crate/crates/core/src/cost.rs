//! Completion time, utilization, SLA violation, the placement objective and
//! the local / non-local / global rewards.
//!
//! Everything here is a pure function of its inputs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AppEdgeSpec, ApplicationGraph, ComponentId, ComponentSpec, NodeId, ResourceGraph, ResourceLinkSpec, ResourceNodeSpec};
use crate::placement::PlacementState;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CostError {
    #[error("component {0} is not placed")]
    Unplaced(ComponentId),
    #[error("incomplete placement: {placed} of {total} components placed")]
    Incomplete { placed: usize, total: usize },
    #[error("expected {expected} local rewards, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Weights of the objective and the reward functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricWeights {
    /// Objective: utilization weight.
    pub alpha: f64,
    /// Objective: completion-time weight.
    pub beta: f64,
    /// Objective: SLA-violation weight.
    pub gamma: f64,
    /// Local reward weights.
    pub local_alpha: f64,
    pub local_beta: f64,
    pub local_gamma: f64,
    /// Non-local reward weights (SLA, completion time).
    pub delta1: f64,
    pub delta2: f64,
    pub lambda_g: f64,
    /// Per-zone weight of local rewards in the global reward. Empty means
    /// uniform `1 / N_local`, filled in by [`MetricWeights::resolve`].
    pub mu: Vec<f64>,
}

impl Default for MetricWeights {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.01,
            gamma: 0.02,
            local_alpha: 1.0,
            local_beta: 1.0,
            local_gamma: 1.0,
            delta1: 1.0,
            delta2: 1.0,
            lambda_g: 1.0,
            mu: Vec::new(),
        }
    }
}

impl MetricWeights {
    /// Fills in uniform `mu` for `n_local` zones when unset.
    pub fn resolve(mut self, n_local: usize) -> Self {
        if self.mu.is_empty() && n_local > 0 {
            self.mu = vec![1.0 / n_local as f64; n_local];
        }
        self
    }

    /// Problems with the weights; empty when valid for `n_local` zones.
    pub fn problems(&self, n_local: usize) -> Vec<String> {
        let mut out = Vec::new();
        let scalars = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("local_alpha", self.local_alpha),
            ("local_beta", self.local_beta),
            ("local_gamma", self.local_gamma),
            ("delta1", self.delta1),
            ("delta2", self.delta2),
            ("lambda_g", self.lambda_g),
        ];
        for (name, v) in scalars {
            if v < 0.0 || !v.is_finite() {
                out.push(format!("weights.{name} = {v} must be a finite value >= 0"));
            }
        }
        if let Some(m) = self.mu.iter().find(|m| **m < 0.0 || !m.is_finite()) {
            out.push(format!("weights.mu contains {m}, must be >= 0"));
        }
        if !self.mu.is_empty() && self.mu.len() != n_local {
            out.push(format!("weights.mu has {} entries, expected {n_local}", self.mu.len()));
        }
        out
    }
}

/// Aggregate metrics for a set of placed components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub per_component_ct: Vec<f64>,
    pub ct_app: f64,
    pub ru: f64,
    pub svr: f64,
    pub objective: f64,
}

impl CostReport {
    /// Builds a report from component completion times, their deadlines and a
    /// utilization snapshot. Components listed in `unplaced` count as SLA
    /// violations and contribute no completion time.
    pub fn from_parts(cts: Vec<f64>, deadlines: &[f64], unplaced: usize, ru: f64, w: &MetricWeights) -> Self {
        let ct_app = cts.iter().sum();
        let total = cts.len() + unplaced;
        let misses = cts.iter().zip(deadlines).filter(|(ct, ddl)| ct > ddl).count() + unplaced;
        let svr = if total == 0 { 0.0 } else { 100.0 * misses as f64 / total as f64 };
        let mut report = CostReport { per_component_ct: cts, ct_app, ru, svr, objective: 0.0 };
        report.objective = objective(&report, w);
        report
    }

    /// Full report for a completely placed application.
    pub fn evaluate(app: &ApplicationGraph, res: &ResourceGraph, state: &PlacementState, w: &MetricWeights) -> Result<Self, CostError> {
        require_complete(state)?;
        let cts = (0..app.len()).map(|c| completion_time_component(app, res, state, c)).collect::<Result<Vec<_>, _>>()?;
        let deadlines: Vec<f64> = app.components().iter().map(|c| c.ddl).collect();
        Ok(Self::from_parts(cts, &deadlines, 0, resource_utilization(state), w))
    }
}

/// Computation time of `c` on `v`: device response time plus `work / speed`.
pub fn comp_time(c: &ComponentSpec, v: &ResourceNodeSpec) -> f64 {
    v.pt + c.work / v.speed
}

/// Time to push one message of `edge` across a single link.
pub fn link_time(edge: &AppEdgeSpec, link: &ResourceLinkSpec) -> f64 {
    link.latency + edge.msg_size / link.bandwidth
}

/// Communication time of `edge` over `path`; zero for an empty path.
pub fn comm_time<'a>(edge: &AppEdgeSpec, path: impl IntoIterator<Item = &'a ResourceLinkSpec>) -> f64 {
    path.into_iter().fold(0.0, |acc, l| acc + link_time(edge, l))
}

/// Completion time of component `c`: computation on its host plus the
/// communication time of every routed incident edge for which `c` is the
/// larger endpoint id (each edge is charged exactly once).
pub fn completion_time_component(
    app: &ApplicationGraph,
    res: &ResourceGraph,
    state: &PlacementState,
    c: ComponentId,
) -> Result<f64, CostError> {
    let host: NodeId = state.host(c).ok_or(CostError::Unplaced(c))?;
    let mut ct = comp_time(app.component(c), res.node(host));
    for &(j, e) in app.incident(c) {
        if j < c {
            if let Some(r) = state.routes().get(&e) {
                ct += comm_time(&app.edges()[e], r.links.iter().map(|&l| res.link(l)));
            }
        }
    }
    Ok(ct)
}

fn require_complete(state: &PlacementState) -> Result<(), CostError> {
    if state.is_complete() {
        Ok(())
    } else {
        Err(CostError::Incomplete { placed: state.placed_count(), total: state.hosts().len() })
    }
}

/// Sum of per-component completion times (sequential workflow).
pub fn completion_time_app(app: &ApplicationGraph, res: &ResourceGraph, state: &PlacementState) -> Result<f64, CostError> {
    require_complete(state)?;
    (0..app.len()).map(|c| completion_time_component(app, res, state, c)).sum()
}

/// Mean used fraction of one node over its non-zero capacity dimensions.
pub fn node_utilization(state: &PlacementState, v: NodeId) -> f64 {
    let cap = state.capacity(v).to_array();
    let left = state.residual(v).to_array();
    let mut sum = 0.0;
    let mut dims = 0;
    for d in 0..4 {
        if cap[d] > 0.0 {
            sum += ((cap[d] - left[d]) / cap[d]).clamp(0.0, 1.0);
            dims += 1;
        }
    }
    if dims == 0 {
        0.0
    } else {
        sum / dims as f64
    }
}

/// Average utilization over the available nodes among `nodes`.
pub fn resource_utilization_over(state: &PlacementState, nodes: impl IntoIterator<Item = NodeId>) -> f64 {
    let mut sum = 0.0;
    let mut count = 0;
    for v in nodes {
        if state.available(v) {
            sum += node_utilization(state, v);
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Average utilization over all available nodes.
pub fn resource_utilization(state: &PlacementState) -> f64 {
    resource_utilization_over(state, 0..state.node_count())
}

/// Percentage of components whose completion time exceeds their deadline.
pub fn sla_violation_rate(app: &ApplicationGraph, res: &ResourceGraph, state: &PlacementState) -> Result<f64, CostError> {
    require_complete(state)?;
    if app.is_empty() {
        return Ok(0.0);
    }
    let mut misses = 0;
    for c in 0..app.len() {
        if completion_time_component(app, res, state, c)? > app.component(c).ddl {
            misses += 1;
        }
    }
    Ok(100.0 * misses as f64 / app.len() as f64)
}

/// `alpha * RU - beta * CT_app - gamma * SVR`.
pub fn objective(report: &CostReport, w: &MetricWeights) -> f64 {
    w.alpha * report.ru - w.beta * report.ct_app - w.gamma * report.svr
}

fn smoothed_reciprocal(x: f64) -> f64 {
    1.0 / (1.0 + x)
}

/// Local reward over one zone's report.
pub fn local_reward(zone: &CostReport, w: &MetricWeights) -> f64 {
    w.local_alpha * zone.ru + w.local_beta * smoothed_reciprocal(zone.ct_app) + w.local_gamma * smoothed_reciprocal(zone.svr)
}

/// System-wide reward on SLA violations and total completion time.
pub fn non_local_reward(global: &CostReport, w: &MetricWeights) -> f64 {
    w.delta1 * smoothed_reciprocal(global.svr) + w.delta2 * smoothed_reciprocal(global.ct_app)
}

/// `lambda * non_local + sum_i mu_i * locals[i]`.
pub fn global_reward(non_local: f64, locals: &[f64], w: &MetricWeights) -> Result<f64, CostError> {
    if locals.len() != w.mu.len() {
        return Err(CostError::LengthMismatch { expected: w.mu.len(), got: locals.len() });
    }
    Ok(w.lambda_g * non_local + w.mu.iter().zip(locals).map(|(m, r)| m * r).sum::<f64>())
}
