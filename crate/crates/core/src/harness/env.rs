//! Shared episode machinery: the static environment (graphs, zones, weights)
//! and the mutable bookkeeping of one episode across application arrivals.

use std::sync::Arc;

use serde::Serialize;

use super::dynamics::{apply_dynamics, DynamicsSpec, Flip};
use crate::cost::{completion_time_component, resource_utilization_over, CostReport, MetricWeights};
use crate::embedding::FeatureScale;
use crate::model::{induced_subgraph, ApplicationGraph, ComponentId, NodeId, Partition, PartitionError, ResourceGraph, Subgraph, ZoneId};
use crate::placement::{ActionMask, PlacementError, PlacementState};
use crate::rng::{seeded, Rng};

/// One zone of the partition with its re-indexed subgraph.
#[derive(Debug, Clone)]
pub struct Zone {
    pub id: ZoneId,
    pub sub: Subgraph,
    pub adjacency: Arc<Vec<Vec<usize>>>,
}

impl Zone {
    /// Global ids of the zone's nodes, ascending.
    pub fn nodes(&self) -> &[NodeId] {
        &self.sub.global_ids
    }
}

#[derive(Debug, Clone)]
pub struct AppSlot {
    pub graph: ApplicationGraph,
    pub adjacency: Arc<Vec<Vec<usize>>>,
}

/// Everything that stays fixed across the episodes of one scenario.
#[derive(Debug, Clone)]
pub struct Environment {
    pub resources: ResourceGraph,
    pub initial_avail: Vec<bool>,
    pub partition: Partition,
    pub zones: Vec<Zone>,
    pub apps: Vec<AppSlot>,
    pub arrivals: Vec<usize>,
    pub scale: FeatureScale,
    pub weights: MetricWeights,
    pub dynamics: DynamicsSpec,
    pub failure_penalty: f64,
    full_adjacency: Arc<Vec<Vec<usize>>>,
}

/// Nodes made unavailable at episode start: the highest ids, `pct` percent of
/// all nodes rounded down.
pub fn masked_nodes(n: usize, pct: f64) -> Vec<NodeId> {
    let k = ((pct / 100.0) * n as f64).floor() as usize;
    (n - k.min(n)..n).collect()
}

pub struct EnvironmentConfig {
    pub weights: MetricWeights,
    pub dynamics: DynamicsSpec,
    pub masked_node_pct: f64,
    pub failure_penalty: f64,
}

impl Default for EnvironmentConfig {
    fn default() -> Self {
        Self { weights: MetricWeights::default(), dynamics: DynamicsSpec::default(), masked_node_pct: 0.0, failure_penalty: -1.0 }
    }
}

impl Environment {
    pub fn new(
        resources: ResourceGraph,
        partition: Partition,
        apps: Vec<ApplicationGraph>,
        arrivals: Vec<usize>,
        config: EnvironmentConfig,
    ) -> Result<Self, PartitionError> {
        let zones = (0..partition.zones())
            .map(|z| {
                let sub = induced_subgraph(&resources, &partition, z)?;
                let adjacency = Arc::new(sub.graph.adjacency());
                Ok(Zone { id: z, sub, adjacency })
            })
            .collect::<Result<Vec<_>, PartitionError>>()?;
        let scale = FeatureScale::from_graphs(&resources, &apps);
        let mut initial_avail: Vec<bool> = resources.nodes().iter().map(|v| v.aval).collect();
        for v in masked_nodes(resources.len(), config.masked_node_pct) {
            initial_avail[v] = false;
        }
        let full_adjacency = Arc::new(resources.adjacency());
        let apps = apps
            .into_iter()
            .map(|graph| {
                let adjacency = Arc::new(graph.adjacency());
                AppSlot { graph, adjacency }
            })
            .collect();
        Ok(Self {
            weights: config.weights.resolve(partition.zones()),
            resources,
            initial_avail,
            partition,
            zones,
            apps,
            arrivals,
            scale,
            dynamics: config.dynamics,
            failure_penalty: config.failure_penalty,
            full_adjacency,
        })
    }

    /// The same environment re-partitioned into one zone holding every node.
    pub fn centralized(&self) -> Self {
        let mut env = self.clone();
        env.partition = Partition::single(self.resources.len());
        let sub = induced_subgraph(&env.resources, &env.partition, 0).expect("single zone is always valid");
        env.zones = vec![Zone { id: 0, sub, adjacency: self.full_adjacency.clone() }];
        env.weights.mu = vec![1.0];
        env
    }

    pub fn zone_count(&self) -> usize {
        self.zones.len()
    }

    pub fn app(&self, slot: usize) -> &ApplicationGraph {
        &self.apps[slot].graph
    }

    /// Total components over the arrival sequence.
    pub fn arrival_components(&self) -> usize {
        self.arrivals.iter().map(|&a| self.apps[a].graph.len()).sum()
    }
}

/// A component placed during an episode, with its completion time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentRecord {
    pub arrival: usize,
    pub app: usize,
    pub component: ComponentId,
    pub node: NodeId,
    pub zone: ZoneId,
    pub ct: f64,
    pub ddl: f64,
}

#[derive(Debug, Clone)]
struct Current {
    arrival: usize,
    slot: usize,
    zone: ZoneId,
}

/// Mutable state of one episode. Applications are placed one at a time; each
/// finished application leaves its capacity consumption behind for the next.
pub struct Episode<'e> {
    env: &'e Environment,
    arrivals: Vec<usize>,
    state: PlacementState,
    current: Option<Current>,
    records: Vec<ComponentRecord>,
    unplaced_by_zone: Vec<usize>,
    unplaced_unassigned: usize,
    failed_zones: Vec<bool>,
    failed: bool,
    step: usize,
    dynamics_rng: Rng,
    flips: Vec<Flip>,
}

impl<'e> Episode<'e> {
    /// Episode over the application slots `arrivals`, in order.
    pub fn new(env: &'e Environment, arrivals: Vec<usize>, dynamics_seed: u64) -> Self {
        let empty = ApplicationGraph::new(Vec::new(), Vec::new());
        let mut state = PlacementState::new(&empty, &env.resources);
        for (v, &a) in env.initial_avail.iter().enumerate() {
            state.set_available(v, a);
        }
        Self {
            env,
            arrivals,
            state,
            current: None,
            records: Vec::new(),
            unplaced_by_zone: vec![0; env.zone_count()],
            unplaced_unassigned: 0,
            failed_zones: vec![false; env.zone_count()],
            failed: false,
            step: 0,
            dynamics_rng: seeded(dynamics_seed),
            flips: Vec::new(),
        }
    }

    pub fn env(&self) -> &'e Environment {
        self.env
    }

    pub fn state(&self) -> &PlacementState {
        &self.state
    }

    pub fn records(&self) -> &[ComponentRecord] {
        &self.records
    }

    pub fn flips(&self) -> &[Flip] {
        &self.flips
    }

    pub fn failed(&self) -> bool {
        self.failed
    }

    pub fn zone_failed(&self, zone: ZoneId) -> bool {
        self.failed_zones[zone]
    }

    /// Decision steps taken so far across all applications.
    pub fn steps(&self) -> usize {
        self.step
    }

    pub fn arrivals(&self) -> &[usize] {
        &self.arrivals
    }

    /// Starts placing arrival `arrival` inside `zone`.
    pub fn begin(&mut self, arrival: usize, zone: ZoneId) {
        assert!(self.current.is_none(), "previous application still in progress");
        assert!(!self.failed, "episode already terminated");
        let slot = self.arrivals[arrival];
        self.state = self.state.next_application(self.env.app(slot));
        self.current = Some(Current { arrival, slot, zone });
    }

    fn current(&self) -> &Current {
        self.current.as_ref().expect("no application in progress")
    }

    pub fn current_app(&self) -> &'e ApplicationGraph {
        self.env.app(self.current().slot)
    }

    pub fn current_slot(&self) -> usize {
        self.current().slot
    }

    pub fn current_zone(&self) -> ZoneId {
        self.current().zone
    }

    /// Next component to place in the current application, after applying
    /// the availability dynamics of this decision step. `None` when the
    /// application is complete.
    pub fn next_decision(&mut self) -> Option<ComponentId> {
        let c = self.state.next_component()?;
        let flips = apply_dynamics(&mut self.state, &self.env.dynamics, self.step, &mut self.dynamics_rng);
        self.flips.extend(flips);
        Some(c)
    }

    /// Mask over the current zone's nodes, in local id order.
    pub fn mask(&self, c: ComponentId) -> ActionMask {
        let zone = &self.env.zones[self.current_zone()];
        self.state.action_mask(self.current_app(), &self.env.resources, c, zone.nodes())
    }

    /// Places `c` on local node `local` of the current zone.
    pub fn place_local(&mut self, c: ComponentId, local: usize) -> Result<NodeId, PlacementError> {
        let v = self.env.zones[self.current_zone()].nodes()[local];
        self.place(c, v)?;
        Ok(v)
    }

    /// Places `c` on global node `v`.
    pub fn place(&mut self, c: ComponentId, v: NodeId) -> Result<(), PlacementError> {
        self.state = self.state.apply(self.current_app(), &self.env.resources, c, v)?;
        self.step += 1;
        Ok(())
    }

    /// Closes the current application after its last component is placed.
    pub fn finish(&mut self) {
        let cur = self.current.take().expect("no application in progress");
        let app = self.env.app(cur.slot);
        assert!(self.state.is_complete(), "finish called on an incomplete application");
        for c in 0..app.len() {
            let node = self.state.host(c).expect("complete");
            let ct = completion_time_component(app, &self.env.resources, &self.state, c).expect("complete");
            self.records.push(ComponentRecord {
                arrival: cur.arrival,
                app: cur.slot,
                component: c,
                node,
                zone: self.env.partition.zone_of(node),
                ct,
                ddl: app.component(c).ddl,
            });
        }
    }

    /// Terminates the episode: the current application and every arrival
    /// after it count as unplaced. Capacity already taken stays taken.
    pub fn fail(&mut self) {
        let cur = self.current.take().expect("no application in progress");
        self.unplaced_by_zone[cur.zone] += self.env.app(cur.slot).len();
        self.failed_zones[cur.zone] = true;
        self.unplaced_unassigned += self.arrivals.iter().skip(cur.arrival + 1).map(|&a| self.env.app(a).len()).sum::<usize>();
        self.failed = true;
    }

    /// Report over the components hosted in `zone`, plus the components of a
    /// failed application delegated there, with utilization over the zone.
    pub fn zone_report(&self, zone: ZoneId) -> CostReport {
        let (cts, ddls): (Vec<f64>, Vec<f64>) = self.records.iter().filter(|r| r.zone == zone).map(|r| (r.ct, r.ddl)).unzip();
        let ru = resource_utilization_over(&self.state, self.env.zones[zone].nodes().iter().copied());
        CostReport::from_parts(cts, &ddls, self.unplaced_by_zone[zone], ru, &self.env.weights)
    }

    /// Report over every arrival of the episode.
    pub fn global_report(&self) -> CostReport {
        let (cts, ddls): (Vec<f64>, Vec<f64>) = self.records.iter().map(|r| (r.ct, r.ddl)).unzip();
        let unplaced = self.unplaced_by_zone.iter().sum::<usize>() + self.unplaced_unassigned;
        let ru = resource_utilization_over(&self.state, 0..self.env.resources.len());
        CostReport::from_parts(cts, &ddls, unplaced, ru, &self.env.weights)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::objective;
    use crate::model::fixtures::*;

    fn env(apps: Vec<ApplicationGraph>, arrivals: Vec<usize>) -> Environment {
        let res = ring(6);
        let part = Partition::from_assignment(vec![0, 0, 0, 1, 1, 1], 2).unwrap();
        Environment::new(res, part, apps, arrivals, EnvironmentConfig::default()).unwrap()
    }

    #[test]
    fn masked_nodes_take_highest_ids() {
        assert_eq!(masked_nodes(10, 20.0), vec![8, 9]);
        assert_eq!(masked_nodes(10, 0.0), Vec::<usize>::new());
        assert_eq!(masked_nodes(3, 100.0), vec![0, 1, 2]);
        assert_eq!(masked_nodes(4, 30.0), vec![3]);
    }

    #[test]
    fn two_arrivals_share_capacity() {
        let e = env(vec![chain_app(2)], vec![0, 0]);
        let mut ep = Episode::new(&e, vec![0, 0], 0);
        for arrival in 0..2 {
            ep.begin(arrival, 1);
            while let Some(c) = ep.next_decision() {
                let m = ep.mask(c);
                let local = m.allowed.iter().position(|&a| a).unwrap();
                ep.place_local(c, local).unwrap();
            }
            ep.finish();
        }
        assert_eq!(ep.records().len(), 4);
        assert!(ep.records().iter().all(|r| r.zone == 1));
        assert_eq!(ep.steps(), 4);
        // Node 3 has cpu 4: four unit components fit there.
        assert!(ep.records().iter().all(|r| r.node == 3));
        let z1 = ep.zone_report(1);
        assert_eq!(z1.per_component_ct.len(), 4);
        assert_eq!(ep.zone_report(0).per_component_ct.len(), 0);
        let g = ep.global_report();
        assert_eq!(g.ct_app, z1.ct_app);
        assert!((g.objective - objective(&g, &e.weights)).abs() < 1e-15);
    }

    #[test]
    fn failure_counts_remaining_arrivals() {
        let big = ApplicationGraph::new(vec![comp(0, 100.0, 1.0, 10.0)], vec![]);
        let e = env(vec![chain_app(2), big], vec![0, 1, 0]);
        let mut ep = Episode::new(&e, e.arrivals.clone(), 0);
        ep.begin(0, 0);
        while let Some(c) = ep.next_decision() {
            ep.place_local(c, 0).unwrap();
        }
        ep.finish();
        ep.begin(1, 1);
        let c = ep.next_decision().unwrap();
        assert!(!ep.mask(c).any());
        ep.fail();
        assert!(ep.failed() && ep.zone_failed(1) && !ep.zone_failed(0));
        let g = ep.global_report();
        // 2 placed, 1 failed, 2 never attempted.
        assert_eq!(g.svr, 100.0 * 3.0 / 5.0);
        assert_eq!(ep.zone_report(1).svr, 100.0);
    }

    #[test]
    fn centralized_has_one_zone() {
        let e = env(vec![chain_app(2)], vec![0]).centralized();
        assert_eq!(e.zone_count(), 1);
        assert_eq!(e.zones[0].nodes(), &[0, 1, 2, 3, 4, 5]);
        assert_eq!(e.weights.mu, vec![1.0]);
    }
}
