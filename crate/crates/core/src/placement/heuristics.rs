//! Classic bin-packing placement baselines.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::state::PlacementState;
use crate::model::{ApplicationGraph, ComponentId, NodeId, ResourceGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeuristicKind {
    FirstFit,
    BestFit,
    WorstFit,
    RoundRobin,
}

impl HeuristicKind {
    pub const ALL: [HeuristicKind; 4] = [Self::FirstFit, Self::BestFit, Self::WorstFit, Self::RoundRobin];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::FirstFit => "first_fit",
            Self::BestFit => "best_fit",
            Self::WorstFit => "worst_fit",
            Self::RoundRobin => "round_robin",
        }
    }
}

impl fmt::Display for HeuristicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HeuristicKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s.replace('-', "_"))
            .ok_or_else(|| format!("unknown heuristic `{s}` (expected first_fit, best_fit, worst_fit or round_robin)"))
    }
}

/// Sum over non-zero capacity dimensions of `residual / capacity` after
/// hypothetically placing `c` on `v`.
fn residual_score(state: &PlacementState, app: &ApplicationGraph, c: ComponentId, v: NodeId) -> f64 {
    let cap = state.capacity(v).to_array();
    let left = state.residual(v).sub(app.component(c).demand()).to_array();
    (0..4).filter(|&d| cap[d] > 0.0).map(|d| left[d] / cap[d]).sum()
}

/// Stateful heuristic placer. Round-robin keeps a cursor across calls, also
/// across applications of one episode.
#[derive(Debug, Clone)]
pub struct HeuristicPlacer {
    kind: HeuristicKind,
    cursor: usize,
}

impl HeuristicPlacer {
    pub fn new(kind: HeuristicKind) -> Self {
        Self { kind, cursor: 0 }
    }

    pub fn kind(&self) -> HeuristicKind {
        self.kind
    }

    /// Picks a node among `candidates` (ascending global ids) for `c`, or
    /// `None` when none is feasible.
    pub fn choose(
        &mut self,
        state: &PlacementState,
        app: &ApplicationGraph,
        res: &ResourceGraph,
        c: ComponentId,
        candidates: &[NodeId],
    ) -> Option<NodeId> {
        let mask = state.action_mask(app, res, c, candidates);
        let feasible = || candidates.iter().zip(&mask.allowed).filter(|(_, &ok)| ok).map(|(&v, _)| v);
        match self.kind {
            HeuristicKind::FirstFit => feasible().next(),
            HeuristicKind::BestFit => extreme(feasible(), |v| residual_score(state, app, c, v), |a, b| a < b),
            HeuristicKind::WorstFit => extreme(feasible(), |v| residual_score(state, app, c, v), |a, b| a > b),
            HeuristicKind::RoundRobin => {
                let n = candidates.len();
                let pick = (0..n).map(|k| (self.cursor + k) % n).find(|&i| mask.allowed[i])?;
                self.cursor = (pick + 1) % n;
                Some(candidates[pick])
            }
        }
    }
}

/// Element with the strictly best key; the earliest (lowest id) wins ties.
fn extreme(items: impl Iterator<Item = NodeId>, key: impl Fn(NodeId) -> f64, better: impl Fn(f64, f64) -> bool) -> Option<NodeId> {
    let mut best: Option<(NodeId, f64)> = None;
    for v in items {
        let k = key(v);
        if best.is_none_or(|(_, bk)| better(k, bk)) {
            best = Some((v, k));
        }
    }
    best.map(|(v, _)| v)
}

/// A placement run that got stuck: the partial state and the component
/// that had no feasible node.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementFailure {
    pub state: PlacementState,
    pub component: ComponentId,
}

/// Places `app` on a fresh `res` with a heuristic over all nodes.
pub fn heuristic_place(app: &ApplicationGraph, res: &ResourceGraph, kind: HeuristicKind) -> Result<PlacementState, Box<PlacementFailure>> {
    let candidates: Vec<NodeId> = (0..res.len()).collect();
    let mut placer = HeuristicPlacer::new(kind);
    let mut state = PlacementState::new(app, res);
    while let Some(c) = state.next_component() {
        match placer.choose(&state, app, res, c, &candidates) {
            Some(v) => state = state.apply(app, res, c, v).expect("heuristics choose only unmasked nodes"),
            None => return Err(Box::new(PlacementFailure { state, component: c })),
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;
    use crate::model::{ApplicationGraph, ResourceGraph};

    #[test]
    fn forced_choice_all_agree() {
        let res = ResourceGraph::new(vec![node(0, 1.0, 0.0, 1.0), node(1, 8.0, 0.0, 1.0)], vec![link(0, 1, 1.0, 1.0)]);
        let app = ApplicationGraph::new(vec![comp(0, 4.0, 1.0, 10.0)], vec![]);
        for kind in HeuristicKind::ALL {
            assert_eq!(heuristic_place(&app, &res, kind).unwrap().host(0), Some(1), "{kind}");
        }
    }

    #[test]
    fn best_and_worst_fit_diverge() {
        let res = ResourceGraph::new(vec![node(0, 8.0, 0.0, 1.0), node(1, 2.0, 0.0, 1.0)], vec![link(0, 1, 1.0, 1.0)]);
        let app = ApplicationGraph::new(vec![comp(0, 1.0, 1.0, 10.0)], vec![]);
        assert_eq!(heuristic_place(&app, &res, HeuristicKind::BestFit).unwrap().host(0), Some(1));
        assert_eq!(heuristic_place(&app, &res, HeuristicKind::WorstFit).unwrap().host(0), Some(0));
        assert_eq!(heuristic_place(&app, &res, HeuristicKind::FirstFit).unwrap().host(0), Some(0));
    }

    #[test]
    fn round_robin_cycles() {
        let res = ring(3);
        let app = chain_app(4);
        let s = heuristic_place(&app, &res, HeuristicKind::RoundRobin).unwrap();
        assert_eq!(s.hosts(), &[Some(0), Some(1), Some(2), Some(0)]);
    }

    #[test]
    fn failure_reports_component() {
        let res = ResourceGraph::new(vec![node(0, 1.0, 0.0, 1.0)], vec![]);
        let app = chain_app(2);
        let err = heuristic_place(&app, &res, HeuristicKind::FirstFit).unwrap_err();
        assert_eq!(err.component, 1);
        assert_eq!(err.state.placed_count(), 1);
    }

    #[test]
    fn parse_names() {
        assert_eq!("best-fit".parse::<HeuristicKind>(), Ok(HeuristicKind::BestFit));
        assert!("nope".parse::<HeuristicKind>().is_err());
    }
}
