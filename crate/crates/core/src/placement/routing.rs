//! Constrained shortest-path routing of application edges.

use serde::{Deserialize, Serialize};

use crate::cost::link_time;
use crate::model::{AppEdgeSpec, NodeId, ResourceGraph};

/// A routed communication path. An empty path means co-location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    /// Visited nodes from source to destination, inclusive.
    pub nodes: Vec<NodeId>,
    /// Link indices into the resource graph, in traversal order.
    pub links: Vec<usize>,
    pub comm_time: f64,
}

impl Route {
    pub fn co_located(v: NodeId) -> Self {
        Route { nodes: vec![v], links: Vec::new(), comm_time: 0.0 }
    }
}

/// Minimum-communication-time path from `src` to `dst` for `edge`.
///
/// Only available nodes and links with `bandwidth >= edge.min_bandwidth` are
/// used. Returns `None` when no such path exists or when the cheapest one
/// takes longer than `edge.max_latency`. Ties resolve towards the lowest node
/// id. Link weights are non-negative so plain Dijkstra is exact; the O(n^2)
/// variant keeps tie-breaking trivially deterministic.
pub fn route(res: &ResourceGraph, avail: &[bool], edge: &AppEdgeSpec, src: NodeId, dst: NodeId) -> Option<Route> {
    if src == dst {
        return Some(Route::co_located(src));
    }
    if !avail[src] || !avail[dst] {
        return None;
    }
    let n = res.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut via: Vec<Option<(NodeId, usize)>> = vec![None; n];
    let mut done = vec![false; n];
    dist[src] = 0.0;
    loop {
        let mut best: Option<NodeId> = None;
        for v in 0..n {
            if !done[v] && dist[v].is_finite() && best.is_none_or(|b| dist[v] < dist[b]) {
                best = Some(v);
            }
        }
        let Some(u) = best else { break };
        if u == dst {
            break;
        }
        done[u] = true;
        for &(w, l) in res.incident(u) {
            let link = res.link(l);
            if done[w] || !avail[w] || link.bandwidth < edge.min_bandwidth {
                continue;
            }
            let candidate = dist[u] + link_time(edge, link);
            if candidate < dist[w] {
                dist[w] = candidate;
                via[w] = Some((u, l));
            }
        }
    }
    if !dist[dst].is_finite() || dist[dst] > edge.max_latency {
        return None;
    }
    let mut nodes = vec![dst];
    let mut links = Vec::new();
    let mut cur = dst;
    while let Some((prev, l)) = via[cur] {
        nodes.push(prev);
        links.push(l);
        cur = prev;
    }
    nodes.reverse();
    links.reverse();
    // Re-sum in path order so the stored time equals `comm_time` over the links.
    let comm_time = links.iter().fold(0.0, |acc, &l| acc + link_time(edge, res.link(l)));
    Some(Route { nodes, links, comm_time })
}
