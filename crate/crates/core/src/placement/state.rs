use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use super::routing::{route, Route};
use crate::model::{AppEdgeSpec, ApplicationGraph, ComponentId, NodeId, ResourceGraph, Resources};

/// Why a component cannot go on a node.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlacementError {
    #[error("unknown-node:{0}")]
    UnknownNode(NodeId),
    #[error("unknown-component:{0}")]
    UnknownComponent(ComponentId),
    #[error("already-placed:{0}")]
    AlreadyPlaced(ComponentId),
    #[error("unavailable:node {0}")]
    Unavailable(NodeId),
    #[error("capacity:{0}")]
    Capacity(&'static str),
    #[error("route:edge {edge} to component {neighbor} has no path within latency/bandwidth bounds")]
    Route { edge: usize, neighbor: ComponentId },
}

/// Deterministic BFS order from component 0, neighbors visited by id.
///
/// Components unreachable from 0 (only possible for unvalidated input) are
/// appended in id order so every component still appears exactly once.
pub fn placement_order(app: &ApplicationGraph) -> Vec<ComponentId> {
    let n = app.len();
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(c) = queue.pop_front() {
            order.push(c);
            for &(j, _) in app.incident(c) {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    order
}

/// Boolean per candidate node; `true` means placeable for the current component.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ActionMask {
    pub allowed: Vec<bool>,
}

impl ActionMask {
    pub fn any(&self) -> bool {
        self.allowed.iter().any(|&a| a)
    }

    pub fn count(&self) -> usize {
        self.allowed.iter().filter(|&&a| a).count()
    }
}

/// Partial placement of one application on the resource graph.
///
/// `baseline` holds capacity already consumed by applications placed earlier
/// in the same episode, so conservation reads
/// `residual + baseline + sum(hosted demands) == capacity`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementState {
    order: Arc<[ComponentId]>,
    host: Vec<Option<NodeId>>,
    capacity: Vec<Resources>,
    baseline: Vec<Resources>,
    residual: Vec<Resources>,
    avail: Vec<bool>,
    occupants: Vec<usize>,
    routes: BTreeMap<usize, Route>,
    step: usize,
}

impl PlacementState {
    /// Empty placement of `app` on an untouched `res`.
    pub fn new(app: &ApplicationGraph, res: &ResourceGraph) -> Self {
        let capacity: Vec<Resources> = res.nodes().iter().map(|v| v.capacity()).collect();
        Self {
            order: placement_order(app).into(),
            host: vec![None; app.len()],
            baseline: vec![Resources::ZERO; res.len()],
            residual: capacity.clone(),
            capacity,
            avail: res.nodes().iter().map(|v| v.aval).collect(),
            occupants: vec![0; res.len()],
            routes: BTreeMap::new(),
            step: 0,
        }
    }

    /// Empty placement of the next application `app`, inheriting residual
    /// capacity, availability and occupancy from `self`.
    pub fn next_application(&self, app: &ApplicationGraph) -> Self {
        let baseline = self.capacity.iter().zip(&self.residual).map(|(c, r)| c.sub(*r)).collect();
        Self {
            order: placement_order(app).into(),
            host: vec![None; app.len()],
            capacity: self.capacity.clone(),
            baseline,
            residual: self.residual.clone(),
            avail: self.avail.clone(),
            occupants: self.occupants.clone(),
            routes: BTreeMap::new(),
            step: 0,
        }
    }

    pub fn order(&self) -> &[ComponentId] {
        &self.order
    }

    pub fn host(&self, c: ComponentId) -> Option<NodeId> {
        self.host[c]
    }

    pub fn hosts(&self) -> &[Option<NodeId>] {
        &self.host
    }

    pub fn residual(&self, v: NodeId) -> Resources {
        self.residual[v]
    }

    pub fn capacity(&self, v: NodeId) -> Resources {
        self.capacity[v]
    }

    pub fn available(&self, v: NodeId) -> bool {
        self.avail[v]
    }

    pub fn availability(&self) -> &[bool] {
        &self.avail
    }

    /// Number of components (of any application so far) hosted on `v`.
    pub fn occupants(&self, v: NodeId) -> usize {
        self.occupants[v]
    }

    pub fn routes(&self) -> &BTreeMap<usize, Route> {
        &self.routes
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn node_count(&self) -> usize {
        self.capacity.len()
    }

    pub fn placed_count(&self) -> usize {
        self.host.iter().filter(|h| h.is_some()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.host.iter().all(Option::is_some)
    }

    /// First component of the placement order that is not yet placed.
    pub fn next_component(&self) -> Option<ComponentId> {
        self.order.iter().copied().find(|&c| self.host[c].is_none())
    }

    /// Sets a node's availability flag. Placement already made is untouched.
    pub fn set_available(&mut self, v: NodeId, aval: bool) {
        self.avail[v] = aval;
    }

    /// Route for `edge` from `src` to `dst` under the current availability.
    pub fn route_edge(&self, res: &ResourceGraph, edge: &AppEdgeSpec, src: NodeId, dst: NodeId) -> Option<Route> {
        route(res, &self.avail, edge, src, dst)
    }

    /// Checks whether `c` may be placed on `v`, returning the first violated
    /// constraint. On success returns the routes that placement would add.
    pub fn check(
        &self,
        app: &ApplicationGraph,
        res: &ResourceGraph,
        c: ComponentId,
        v: NodeId,
    ) -> Result<Vec<(usize, Route)>, PlacementError> {
        if c >= self.host.len() {
            return Err(PlacementError::UnknownComponent(c));
        }
        if v >= self.capacity.len() {
            return Err(PlacementError::UnknownNode(v));
        }
        if self.host[c].is_some() {
            return Err(PlacementError::AlreadyPlaced(c));
        }
        if !self.avail[v] {
            return Err(PlacementError::Unavailable(v));
        }
        if let Some(dim) = self.residual[v].shortfall(app.component(c).demand()) {
            return Err(PlacementError::Capacity(dim));
        }
        let mut added = Vec::new();
        for &(j, e) in app.incident(c) {
            let Some(hj) = self.host[j] else { continue };
            // Canonical direction: from the smaller component id's host.
            let (src, dst) = if c < j { (v, hj) } else { (hj, v) };
            match self.route_edge(res, &app.edges()[e], src, dst) {
                Some(r) => added.push((e, r)),
                None => return Err(PlacementError::Route { edge: e, neighbor: j }),
            }
        }
        Ok(added)
    }

    /// Mask over `candidates` (global node ids) for component `c`.
    pub fn action_mask(&self, app: &ApplicationGraph, res: &ResourceGraph, c: ComponentId, candidates: &[NodeId]) -> ActionMask {
        ActionMask { allowed: candidates.iter().map(|&v| self.check(app, res, c, v).is_ok()).collect() }
    }

    /// Pure transition: a new state with `c` hosted on `v`.
    pub fn apply(&self, app: &ApplicationGraph, res: &ResourceGraph, c: ComponentId, v: NodeId) -> Result<Self, PlacementError> {
        let added = self.check(app, res, c, v)?;
        let mut next = self.clone();
        next.host[c] = Some(v);
        next.residual[v] = next.residual[v].sub(app.component(c).demand());
        next.occupants[v] += 1;
        next.routes.extend(added);
        next.step += 1;
        debug_assert!(next.conservation_holds(app), "capacity conservation violated after placing {c} on {v}");
        Ok(next)
    }

    /// `residual >= 0` and `residual + baseline + hosted demand == capacity`
    /// on every node and dimension (to 1e-9 relative).
    pub fn conservation_holds(&self, app: &ApplicationGraph) -> bool {
        let mut hosted = vec![Resources::ZERO; self.capacity.len()];
        for (c, h) in self.host.iter().enumerate() {
            if let Some(v) = *h {
                hosted[v] = hosted[v].add(app.component(c).demand());
            }
        }
        (0..self.capacity.len()).all(|v| {
            let cap = self.capacity[v].to_array();
            let res = self.residual[v].to_array();
            let total = self.baseline[v].add(hosted[v]).to_array();
            (0..4).all(|d| res[d] >= -1e-12 * cap[d].max(1.0) && (res[d] + total[d] - cap[d]).abs() <= 1e-9 * cap[d].max(1.0))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;
    use crate::model::{ApplicationGraph, ResourceGraph};

    fn star(leaves: usize) -> ApplicationGraph {
        let comps = (0..=leaves).map(|i| comp(i, 1.0, 1.0, 10.0)).collect();
        let edges = (1..=leaves).rev().map(|i| edge(0, i, 10.0, 1.0, 1.0)).collect();
        ApplicationGraph::new(comps, edges)
    }

    #[test]
    fn bfs_orders() {
        assert_eq!(placement_order(&chain_app(3)), vec![0, 1, 2]);
        assert_eq!(placement_order(&star(4)), vec![0, 1, 2, 3, 4]);
        assert_eq!(placement_order(&chain_app(1)), vec![0]);
        // Chain 0-2-1: BFS reaches 2 before 1.
        let app = ApplicationGraph::new(
            vec![comp(0, 1.0, 1.0, 1.0), comp(1, 1.0, 1.0, 1.0), comp(2, 1.0, 1.0, 1.0)],
            vec![edge(0, 2, 1.0, 1.0, 1.0), edge(2, 1, 1.0, 1.0, 1.0)],
        );
        assert_eq!(placement_order(&app), vec![0, 2, 1]);
    }

    fn two_nodes() -> ResourceGraph {
        ResourceGraph::new(vec![node(0, 2.0, 1.0, 1.0), node(1, 1.0, 1.0, 1.0)], vec![link(0, 1, 1.0, 10.0)])
    }

    #[test]
    fn capacity_mask_and_rejection() {
        let app = ApplicationGraph::new(vec![comp(0, 2.0, 1.0, 10.0)], vec![]);
        let res = two_nodes();
        let s = PlacementState::new(&app, &res);
        assert_eq!(s.action_mask(&app, &res, 0, &[0, 1]).allowed, vec![true, false]);
        let err = s.apply(&app, &res, 0, 1).unwrap_err();
        assert_eq!(err.to_string(), "capacity:cpu");
    }

    #[test]
    fn unavailable_node_is_masked() {
        let app = ApplicationGraph::new(vec![comp(0, 0.5, 1.0, 10.0)], vec![]);
        let res = two_nodes();
        let mut s = PlacementState::new(&app, &res);
        s.set_available(0, false);
        assert_eq!(s.action_mask(&app, &res, 0, &[0, 1]).allowed, vec![false, true]);
        assert_eq!(s.apply(&app, &res, 0, 0).unwrap_err(), PlacementError::Unavailable(0));
    }

    #[test]
    fn exact_fit_saturates() {
        let app = ApplicationGraph::new(vec![comp(0, 2.0, 1.0, 10.0)], vec![]);
        let res = two_nodes();
        let s = PlacementState::new(&app, &res).apply(&app, &res, 0, 0).unwrap();
        assert_eq!(s.residual(0), Resources::ZERO);
        assert!(s.is_complete());
        assert_eq!(s.step(), 1);
    }

    #[test]
    fn co_located_neighbor_gets_empty_route() {
        let app = chain_app(2);
        let res = two_nodes();
        let s0 = PlacementState::new(&app, &res);
        let s1 = s0.apply(&app, &res, 0, 0).unwrap();
        let s2 = s1.apply(&app, &res, 1, 0).unwrap();
        assert!(s2.routes()[&0].links.is_empty());
        // Pure transitions: the inputs are unchanged and replay is identical.
        assert_eq!(s0.placed_count(), 0);
        assert_eq!(s1.placed_count(), 1);
        assert_eq!(s1.apply(&app, &res, 1, 0).unwrap(), s2);
    }

    #[test]
    fn route_constraint_rejects() {
        let app = ApplicationGraph::new(vec![comp(0, 1.0, 1.0, 10.0), comp(1, 1.0, 1.0, 10.0)], vec![edge(0, 1, 10.0, 1.0, 50.0)]);
        let res = two_nodes();
        let s = PlacementState::new(&app, &res).apply(&app, &res, 0, 0).unwrap();
        assert_eq!(s.apply(&app, &res, 1, 1).unwrap_err(), PlacementError::Route { edge: 0, neighbor: 0 });
        assert_eq!(s.action_mask(&app, &res, 1, &[0, 1]).allowed, vec![true, false]);
    }

    #[test]
    fn next_application_carries_residuals() {
        let app = chain_app(2);
        let res = two_nodes();
        let done = PlacementState::new(&app, &res).apply(&app, &res, 0, 0).unwrap().apply(&app, &res, 1, 0).unwrap();
        let next = done.next_application(&app);
        assert_eq!(next.residual(0), done.residual(0));
        assert_eq!(next.occupants(0), 2);
        assert_eq!(next.placed_count(), 0);
        assert!(next.conservation_holds(&app));
        assert_eq!(next.action_mask(&app, &res, 0, &[0, 1]).allowed, vec![false, true]);
    }
}
