//! Splitting the resource graph into local-agent zones.
//!
//! Zones are grown by round-robin multi-source BFS from randomly chosen seed
//! nodes. Each zone has a target size (`n / k`, the first `n % k` zones get one
//! more) and claims, on its turn, the nearest unclaimed node reachable through
//! nodes it already owns. A zone grown this way is connected by construction;
//! a run where some zone gets boxed in before reaching its target is retried
//! with fresh seeds.

use std::collections::VecDeque;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{count_components, NodeId, ResourceGraph, ZoneId};

const MAX_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PartitionError {
    #[error("cannot split {nodes} nodes into {zones} zones")]
    TooManyZones { zones: usize, nodes: usize },
    #[error("number of zones must be positive")]
    NoZones,
    #[error("no balanced connected partition into {zones} zones found after {attempts} attempts")]
    Fragmented { zones: usize, attempts: usize },
    #[error("unknown zone {zone} (partition has {zones})")]
    UnknownZone { zone: ZoneId, zones: usize },
    #[error("partition covers {assigned} nodes but the graph has {nodes}")]
    SizeMismatch { assigned: usize, nodes: usize },
}

/// Assignment of every resource node to exactly one zone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    assignment: Vec<ZoneId>,
    zones: usize,
}

impl Partition {
    /// Builds a partition from an explicit assignment. Zone ids must lie in `0..zones`.
    pub fn from_assignment(assignment: Vec<ZoneId>, zones: usize) -> Result<Self, PartitionError> {
        if zones == 0 {
            return Err(PartitionError::NoZones);
        }
        if let Some(&z) = assignment.iter().find(|&&z| z >= zones) {
            return Err(PartitionError::UnknownZone { zone: z, zones });
        }
        Ok(Self { assignment, zones })
    }

    /// Everything in zone 0.
    pub fn single(nodes: usize) -> Self {
        Self { assignment: vec![0; nodes], zones: 1 }
    }

    pub fn zones(&self) -> usize {
        self.zones
    }

    pub fn zone_of(&self, v: NodeId) -> ZoneId {
        self.assignment[v]
    }

    pub fn assignment(&self) -> &[ZoneId] {
        &self.assignment
    }

    /// Nodes of `zone` in increasing id order.
    pub fn members(&self, zone: ZoneId) -> Vec<NodeId> {
        (0..self.assignment.len()).filter(|&v| self.assignment[v] == zone).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.zones];
        for &z in &self.assignment {
            sizes[z] += 1;
        }
        sizes
    }

    /// True when every zone is non-empty and induces a connected subgraph.
    pub fn zones_connected(&self, res: &ResourceGraph) -> bool {
        (0..self.zones).all(|z| {
            let members = self.members(z);
            !members.is_empty()
                && count_components(res.len(), |v| self.assignment[v] == z, |v| res.incident(v).iter().map(|&(w, _)| w).collect()) == 1
        })
    }
}

/// Seeded, balanced, connected partition of `res` into `n_zones` zones.
///
/// Zone ids are normalized so that zones are numbered by their smallest node id.
pub fn partition_resources(res: &ResourceGraph, n_zones: usize, seed: u64) -> Result<Partition, PartitionError> {
    let n = res.len();
    if n_zones == 0 {
        return Err(PartitionError::NoZones);
    }
    if n_zones > n {
        return Err(PartitionError::TooManyZones { zones: n_zones, nodes: n });
    }
    if n_zones == 1 {
        return Ok(Partition::single(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let targets: Vec<usize> = (0..n_zones).map(|z| n / n_zones + usize::from(z < n % n_zones)).collect();
    for _ in 0..MAX_ATTEMPTS {
        let seeds = index::sample(&mut rng, n, n_zones).into_vec();
        if let Some(assignment) = grow(res, &seeds, &targets) {
            return Ok(normalize(assignment, n_zones));
        }
    }
    Err(PartitionError::Fragmented { zones: n_zones, attempts: MAX_ATTEMPTS })
}

fn grow(res: &ResourceGraph, seeds: &[NodeId], targets: &[usize]) -> Option<Vec<ZoneId>> {
    const UNCLAIMED: usize = usize::MAX;
    let n = res.len();
    let mut owner = vec![UNCLAIMED; n];
    let mut frontier: Vec<VecDeque<NodeId>> = vec![VecDeque::new(); seeds.len()];
    let mut size = vec![0usize; seeds.len()];
    let claim = |z: usize, v: NodeId, owner: &mut Vec<usize>, frontier: &mut Vec<VecDeque<NodeId>>, size: &mut Vec<usize>| {
        owner[v] = z;
        size[z] += 1;
        frontier[z].extend(res.incident(v).iter().map(|&(w, _)| w));
    };
    for (z, &s) in seeds.iter().enumerate() {
        claim(z, s, &mut owner, &mut frontier, &mut size);
    }
    let mut claimed = seeds.len();
    while claimed < n {
        let mut progressed = false;
        for z in 0..seeds.len() {
            if size[z] >= targets[z] {
                continue;
            }
            while let Some(v) = frontier[z].pop_front() {
                if owner[v] == UNCLAIMED {
                    claim(z, v, &mut owner, &mut frontier, &mut size);
                    claimed += 1;
                    progressed = true;
                    break;
                }
            }
        }
        if !progressed {
            return None;
        }
    }
    Some(owner)
}

fn normalize(raw: Vec<ZoneId>, zones: usize) -> Partition {
    let mut relabel = vec![usize::MAX; zones];
    let mut next = 0;
    for &z in &raw {
        if relabel[z] == usize::MAX {
            relabel[z] = next;
            next += 1;
        }
    }
    Partition { assignment: raw.into_iter().map(|z| relabel[z]).collect(), zones }
}

/// A zone's induced subgraph with local node ids and the mapping back.
#[derive(Debug, Clone, PartialEq)]
pub struct Subgraph {
    pub graph: ResourceGraph,
    /// `global_ids[local] = global`.
    pub global_ids: Vec<NodeId>,
}

impl Subgraph {
    pub fn local_id(&self, global: NodeId) -> Option<NodeId> {
        self.global_ids.iter().position(|&g| g == global)
    }
}

/// Nodes of `zone` plus every link with both endpoints inside it, re-indexed.
pub fn induced_subgraph(res: &ResourceGraph, part: &Partition, zone: ZoneId) -> Result<Subgraph, PartitionError> {
    if zone >= part.zones() {
        return Err(PartitionError::UnknownZone { zone, zones: part.zones() });
    }
    if part.assignment.len() != res.len() {
        return Err(PartitionError::SizeMismatch { assigned: part.assignment.len(), nodes: res.len() });
    }
    let global_ids = part.members(zone);
    let mut local = vec![usize::MAX; res.len()];
    for (i, &g) in global_ids.iter().enumerate() {
        local[g] = i;
    }
    let nodes = global_ids
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            let mut node = res.node(g).clone();
            node.id = i;
            node
        })
        .collect();
    let links = res
        .links()
        .iter()
        .filter(|l| part.zone_of(l.a) == zone && part.zone_of(l.b) == zone)
        .map(|l| {
            let mut link = l.clone();
            link.a = local[l.a];
            link.b = local[l.b];
            link
        })
        .collect();
    Ok(Subgraph { graph: ResourceGraph::new(nodes, links), global_ids })
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    fn is_balanced(p: &Partition) -> bool {
        let sizes = p.sizes();
        sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1
    }

    #[test]
    fn ring_splits_into_two_arcs() {
        let g = ring(6);
        let p = partition_resources(&g, 2, 0).unwrap();
        assert_eq!(p.sizes(), vec![3, 3]);
        assert!(p.zones_connected(&g));
        for z in 0..2 {
            let sub = induced_subgraph(&g, &p, z).unwrap();
            assert_eq!(sub.graph.len(), 3);
            assert_eq!(sub.graph.links().len(), 2);
        }
    }

    #[test]
    fn single_zone_is_identity() {
        let g = grid(3, 2);
        let p = partition_resources(&g, 1, 99).unwrap();
        assert_eq!(p.assignment(), &[0; 6]);
        let sub = induced_subgraph(&g, &p, 0).unwrap();
        assert_eq!(sub.graph, g);
        assert_eq!(sub.global_ids, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn grid_three_zones_seed_seven() {
        let g = grid(3, 3);
        let p = partition_resources(&g, 3, 7).unwrap();
        assert_eq!(p.sizes(), vec![3, 3, 3]);
        assert!(p.zones_connected(&g));
    }

    #[test]
    fn too_many_zones() {
        assert_eq!(partition_resources(&ring(3), 4, 0), Err(PartitionError::TooManyZones { zones: 4, nodes: 3 }));
    }

    #[test]
    fn fragmented_graph_fails_without_looping() {
        // Two isolated nodes and one pair: 2 zones of sizes {2, 2} are impossible.
        let nodes = (0..4).map(|i| node(i, 1.0, 0.0, 1.0)).collect();
        let g = ResourceGraph::new(nodes, vec![link(0, 1, 1.0, 1.0)]);
        assert_eq!(partition_resources(&g, 2, 3), Err(PartitionError::Fragmented { zones: 2, attempts: MAX_ATTEMPTS }));
    }

    #[test]
    fn one_node_zone() {
        let g = ring(3);
        let p = Partition::from_assignment(vec![0, 0, 1], 2).unwrap();
        let sub = induced_subgraph(&g, &p, 1).unwrap();
        assert_eq!(sub.graph.len(), 1);
        assert!(sub.graph.links().is_empty());
        assert_eq!(sub.global_ids, vec![2]);
        assert_eq!(induced_subgraph(&g, &p, 2), Err(PartitionError::UnknownZone { zone: 2, zones: 2 }));
    }

    #[test]
    fn subgraph_preserves_attributes_bitwise() {
        let mut nodes: Vec<_> = (0..4).map(|i| node(i, 1.0 / 3.0 + i as f64, 0.1 * i as f64, 0.7)).collect();
        nodes[2].aval = false;
        let links = vec![link(0, 1, 0.1, 3.3), link(1, 2, 0.2, 1.0 / 7.0), link(2, 3, 0.3, 9.0)];
        let g = ResourceGraph::new(nodes, links);
        let p = Partition::from_assignment(vec![1, 0, 0, 1], 2).unwrap();
        let sub = induced_subgraph(&g, &p, 0).unwrap();
        for (local, &global) in sub.global_ids.iter().enumerate() {
            let (a, b) = (sub.graph.node(local), g.node(global));
            assert_eq!(a.cpu.to_bits(), b.cpu.to_bits());
            assert_eq!(a.pt.to_bits(), b.pt.to_bits());
            assert_eq!(a.aval, b.aval);
        }
        assert_eq!(sub.graph.links().len(), 1);
        assert_eq!(sub.graph.link(0).bandwidth.to_bits(), (1.0f64 / 7.0).to_bits());
    }

    proptest! {
        #[test]
        fn grid_partitions_are_sound(w in 1usize..5, h in 1usize..5, k in 1usize..5, seed in any::<u64>()) {
            let g = grid(w, h);
            prop_assume!(k <= g.len());
            match partition_resources(&g, k, seed) {
                Ok(p) => {
                    prop_assert_eq!(p.sizes().iter().sum::<usize>(), g.len());
                    prop_assert!(is_balanced(&p));
                    prop_assert!(p.zones_connected(&g));
                    prop_assert_eq!(partition_resources(&g, k, seed).unwrap(), p.clone());
                    let mut covered: Vec<usize> = (0..k)
                        .flat_map(|z| induced_subgraph(&g, &p, z).unwrap().global_ids)
                        .collect();
                    covered.sort_unstable();
                    prop_assert_eq!(covered, (0..g.len()).collect::<Vec<_>>());
                }
                Err(e) => {
                    let fragmented = matches!(e, PartitionError::Fragmented { .. });
                    prop_assert!(fragmented, "unexpected error {}", e);
                }
            }
        }
    }
}
