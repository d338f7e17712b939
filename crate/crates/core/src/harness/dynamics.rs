//! Node availability dynamics.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::model::NodeId;
use crate::placement::PlacementState;
use crate::rng::Rng;

/// Availability change scheduled at a decision step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlipEvent {
    pub step: usize,
    pub node: NodeId,
    pub aval: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsSpec {
    pub schedule: Vec<FlipEvent>,
    /// Per-step, per-node flip probability in random mode.
    pub toggle_rate: f64,
}

impl DynamicsSpec {
    pub fn is_static(&self) -> bool {
        self.schedule.is_empty() && self.toggle_rate == 0.0
    }
}

/// An availability change that actually happened.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Flip {
    pub step: usize,
    pub node: NodeId,
    pub aval: bool,
}

/// Applies the scheduled events of `step`, then (random mode) flips each node
/// independently with probability `toggle_rate`. Nodes hosting components
/// are never switched off. One uniform draw is consumed per node per step
/// whenever `toggle_rate > 0`, whether or not the node is exempt.
pub fn apply_dynamics(state: &mut PlacementState, spec: &DynamicsSpec, step: usize, rng: &mut Rng) -> Vec<Flip> {
    let mut flips = Vec::new();
    for event in spec.schedule.iter().filter(|e| e.step == step) {
        if event.node >= state.node_count() || state.available(event.node) == event.aval {
            continue;
        }
        if !event.aval && state.occupants(event.node) > 0 {
            continue;
        }
        state.set_available(event.node, event.aval);
        flips.push(Flip { step, node: event.node, aval: event.aval });
    }
    if spec.toggle_rate > 0.0 {
        for v in 0..state.node_count() {
            let draw: f64 = rng.random();
            if draw >= spec.toggle_rate {
                continue;
            }
            let now = state.available(v);
            if now && state.occupants(v) > 0 {
                continue;
            }
            state.set_available(v, !now);
            flips.push(Flip { step, node: v, aval: !now });
        }
    }
    flips
}
