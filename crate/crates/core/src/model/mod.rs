//! Application and resource graph data model.
//!
//! An application is an undirected graph of components (resource demands,
//! abstract work, deadline) joined by communication edges carrying a latency
//! bound, a message size and a bandwidth demand. The infrastructure is an
//! undirected graph of resource nodes (capacities, response time, speed,
//! availability) joined by links (latency, bandwidth).
//!
//! Both graphs are immutable once built. Neighbor lists are computed at
//! construction and sorted by neighbor id so every traversal is deterministic.

mod partition;
mod validate;

pub use partition::{induced_subgraph, partition_resources, Partition, PartitionError, Subgraph};
pub use validate::{validate_application, validate_resources, ModelError};

use serde::{Deserialize, Serialize};

pub type ComponentId = usize;
pub type NodeId = usize;
pub type ZoneId = usize;

/// Names of the four consumable resource dimensions, in storage order.
pub const DIMENSIONS: [&str; 4] = ["cpu", "gpu", "ram", "stor"];

/// A point in the four-dimensional resource space.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Resources {
    pub cpu: f64,
    pub gpu: f64,
    pub ram: f64,
    pub stor: f64,
}

impl Resources {
    pub const ZERO: Resources = Resources { cpu: 0.0, gpu: 0.0, ram: 0.0, stor: 0.0 };

    pub fn new(cpu: f64, gpu: f64, ram: f64, stor: f64) -> Self {
        Self { cpu, gpu, ram, stor }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.cpu, self.gpu, self.ram, self.stor]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn add(self, o: Resources) -> Resources {
        Self::new(self.cpu + o.cpu, self.gpu + o.gpu, self.ram + o.ram, self.stor + o.stor)
    }

    pub fn sub(self, o: Resources) -> Resources {
        Self::new(self.cpu - o.cpu, self.gpu - o.gpu, self.ram - o.ram, self.stor - o.stor)
    }

    /// First dimension (by [`DIMENSIONS`] order) in which `demand` exceeds `self`.
    pub fn shortfall(self, demand: Resources) -> Option<&'static str> {
        let have = self.to_array();
        let need = demand.to_array();
        (0..4).find(|&d| need[d] > have[d]).map(|d| DIMENSIONS[d])
    }
}

/// One application component (microservice).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub id: ComponentId,
    pub cpu: f64,
    pub gpu: f64,
    pub ram: f64,
    pub stor: f64,
    /// Abstract compute units; processing time on node `v` is `work / v.speed`.
    pub work: f64,
    /// Deadline in milliseconds.
    pub ddl: f64,
}

impl ComponentSpec {
    pub fn demand(&self) -> Resources {
        Resources::new(self.cpu, self.gpu, self.ram, self.stor)
    }
}

/// Communication requirement between two components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppEdgeSpec {
    pub a: ComponentId,
    pub b: ComponentId,
    /// Upper bound on communication time, milliseconds.
    pub max_latency: f64,
    /// Data units transferred per message.
    pub msg_size: f64,
    /// Minimum link bandwidth, data units per millisecond.
    pub min_bandwidth: f64,
}

impl AppEdgeSpec {
    pub fn other(&self, c: ComponentId) -> ComponentId {
        if self.a == c {
            self.b
        } else {
            self.a
        }
    }

    pub fn touches(&self, c: ComponentId) -> bool {
        self.a == c || self.b == c
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ApplicationDef {
    #[serde(default)]
    name: String,
    components: Vec<ComponentSpec>,
    #[serde(default)]
    edges: Vec<AppEdgeSpec>,
}

/// Undirected application graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "ApplicationDef", into = "ApplicationDef")]
pub struct ApplicationGraph {
    name: String,
    components: Vec<ComponentSpec>,
    edges: Vec<AppEdgeSpec>,
    /// Per component: (neighbor, edge index), sorted by neighbor.
    incident: Vec<Vec<(ComponentId, usize)>>,
}

impl From<ApplicationDef> for ApplicationGraph {
    fn from(d: ApplicationDef) -> Self {
        Self::with_name(d.name, d.components, d.edges)
    }
}

impl From<ApplicationGraph> for ApplicationDef {
    fn from(g: ApplicationGraph) -> Self {
        ApplicationDef { name: g.name, components: g.components, edges: g.edges }
    }
}

impl ApplicationGraph {
    pub fn new(components: Vec<ComponentSpec>, edges: Vec<AppEdgeSpec>) -> Self {
        Self::with_name(String::new(), components, edges)
    }

    pub fn with_name(name: String, components: Vec<ComponentSpec>, edges: Vec<AppEdgeSpec>) -> Self {
        let n = components.len();
        let mut incident = vec![Vec::new(); n];
        for (i, e) in edges.iter().enumerate() {
            // Malformed edges are left out of the neighbor lists; validation reports them.
            if e.a < n && e.b < n && e.a != e.b {
                incident[e.a].push((e.b, i));
                incident[e.b].push((e.a, i));
            }
        }
        for list in &mut incident {
            list.sort_unstable();
        }
        Self { name, components, edges, incident }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn components(&self) -> &[ComponentSpec] {
        &self.components
    }

    pub fn component(&self, c: ComponentId) -> &ComponentSpec {
        &self.components[c]
    }

    pub fn edges(&self) -> &[AppEdgeSpec] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// (neighbor, edge index) pairs of `c`, sorted by neighbor id.
    pub fn incident(&self, c: ComponentId) -> &[(ComponentId, usize)] {
        &self.incident[c]
    }

    /// Plain neighbor lists, used by the graph encoder.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        self.incident.iter().map(|l| l.iter().map(|&(j, _)| j).collect()).collect()
    }
}

/// One compute resource.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceNodeSpec {
    pub id: NodeId,
    pub cpu: f64,
    pub gpu: f64,
    pub ram: f64,
    pub stor: f64,
    /// Device response time, milliseconds.
    pub pt: f64,
    /// Compute units processed per millisecond.
    pub speed: f64,
    #[serde(default = "default_true")]
    pub aval: bool,
}

fn default_true() -> bool {
    true
}

impl ResourceNodeSpec {
    pub fn capacity(&self) -> Resources {
        Resources::new(self.cpu, self.gpu, self.ram, self.stor)
    }
}

/// Network link between two resource nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceLinkSpec {
    pub a: NodeId,
    pub b: NodeId,
    /// Per-message delivery latency, milliseconds.
    pub latency: f64,
    /// Data units per millisecond.
    pub bandwidth: f64,
}

impl ResourceLinkSpec {
    pub fn other(&self, v: NodeId) -> NodeId {
        if self.a == v {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResourceDef {
    nodes: Vec<ResourceNodeSpec>,
    #[serde(default)]
    links: Vec<ResourceLinkSpec>,
}

/// Undirected resource graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "ResourceDef", into = "ResourceDef")]
pub struct ResourceGraph {
    nodes: Vec<ResourceNodeSpec>,
    links: Vec<ResourceLinkSpec>,
    /// Per node: (neighbor, link index), sorted.
    incident: Vec<Vec<(NodeId, usize)>>,
}

impl From<ResourceDef> for ResourceGraph {
    fn from(d: ResourceDef) -> Self {
        Self::new(d.nodes, d.links)
    }
}

impl From<ResourceGraph> for ResourceDef {
    fn from(g: ResourceGraph) -> Self {
        ResourceDef { nodes: g.nodes, links: g.links }
    }
}

impl ResourceGraph {
    pub fn new(nodes: Vec<ResourceNodeSpec>, links: Vec<ResourceLinkSpec>) -> Self {
        let n = nodes.len();
        let mut incident = vec![Vec::new(); n];
        for (i, l) in links.iter().enumerate() {
            if l.a < n && l.b < n && l.a != l.b {
                incident[l.a].push((l.b, i));
                incident[l.b].push((l.a, i));
            }
        }
        for list in &mut incident {
            list.sort_unstable();
        }
        Self { nodes, links, incident }
    }

    pub fn nodes(&self) -> &[ResourceNodeSpec] {
        &self.nodes
    }

    pub fn node(&self, v: NodeId) -> &ResourceNodeSpec {
        &self.nodes[v]
    }

    pub fn links(&self) -> &[ResourceLinkSpec] {
        &self.links
    }

    pub fn link(&self, l: usize) -> &ResourceLinkSpec {
        &self.links[l]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn incident(&self, v: NodeId) -> &[(NodeId, usize)] {
        &self.incident[v]
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        self.incident.iter().map(|l| l.iter().map(|&(j, _)| j).collect()).collect()
    }

    /// Copy of the graph with the availability flags replaced.
    pub fn with_availability(&self, aval: &[bool]) -> ResourceGraph {
        let mut g = self.clone();
        for (node, &a) in g.nodes.iter_mut().zip(aval) {
            node.aval = a;
        }
        g
    }
}

/// Connected components of `0..n` under `neighbors`, restricted to `keep`.
pub(crate) fn count_components(n: usize, keep: impl Fn(usize) -> bool, neighbors: impl Fn(usize) -> Vec<usize>) -> usize {
    let mut seen = vec![false; n];
    let mut count = 0;
    for start in 0..n {
        if seen[start] || !keep(start) {
            continue;
        }
        count += 1;
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for w in neighbors(u) {
                if !seen[w] && keep(w) {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    count
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn incident_lists_are_sorted() {
        let g = ResourceGraph::new(
            vec![node(0, 1.0, 0.0, 1.0), node(1, 1.0, 0.0, 1.0), node(2, 1.0, 0.0, 1.0)],
            vec![link(0, 2, 1.0, 1.0), link(0, 1, 1.0, 1.0)],
        );
        assert_eq!(g.incident(0), &[(1, 1), (2, 0)]);
        assert_eq!(g.adjacency(), vec![vec![1, 2], vec![0], vec![0]]);
    }

    #[test]
    fn shortfall_names_first_dimension() {
        let have = Resources::new(1.0, 4.0, 0.5, 9.0);
        assert_eq!(have.shortfall(Resources::new(2.0, 0.0, 1.0, 0.0)), Some("cpu"));
        assert_eq!(have.shortfall(Resources::new(1.0, 0.0, 1.0, 0.0)), Some("ram"));
        assert_eq!(have.shortfall(have), None);
    }

    #[test]
    fn serde_rejects_unknown_fields() {
        let text = r#"{"nodes":[{"id":0,"cpu":1,"gpu":0,"ram":1,"stor":0,"pt":0,"speed":1,"colour":"red"}]}"#;
        let err = serde_json::from_str::<ResourceGraph>(text).unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");
    }

    #[test]
    fn serde_round_trip_keeps_adjacency() {
        let g = ring(5);
        let back: ResourceGraph = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
        assert_eq!(g, back);
    }
}
