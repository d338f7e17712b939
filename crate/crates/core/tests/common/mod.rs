//! Random instance generators and straight-line reference computations
//! shared by the integration tests.

#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng as _;

use continuum::model::{
    validate_application, validate_resources, AppEdgeSpec, ApplicationGraph, ComponentSpec, ResourceGraph, ResourceLinkSpec,
    ResourceNodeSpec,
};
use continuum::placement::{placement_order, PlacementState};
use continuum::rng::{seeded, Rng};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn round(x: f64) -> f64 {
    (x * 4.0).round() / 4.0
}

/// Connected graph: a random spanning tree plus extra links.
fn random_links(n: usize, extra: f64, rng: &mut Rng) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for v in 1..n {
        pairs.push((rng.random_range(0..v), v));
    }
    for a in 0..n {
        for b in a + 1..n {
            if !pairs.contains(&(a, b)) && rng.random_bool(extra) {
                pairs.push((a, b));
            }
        }
    }
    pairs
}

pub fn random_resources(n: usize, rng: &mut Rng) -> ResourceGraph {
    let nodes = (0..n)
        .map(|id| ResourceNodeSpec {
            id,
            cpu: rng.random_range(1..=8) as f64,
            gpu: if rng.random_bool(0.3) { rng.random_range(1..=2) as f64 } else { 0.0 },
            ram: rng.random_range(1..=8) as f64,
            stor: rng.random_range(0..=16) as f64,
            pt: round(rng.random_range(0.0..3.0)),
            speed: rng.random_range(1..=4) as f64,
            aval: true,
        })
        .collect();
    let links = random_links(n, 0.35, rng)
        .into_iter()
        .map(|(a, b)| ResourceLinkSpec { a, b, latency: round(rng.random_range(0.25..3.0)), bandwidth: rng.random_range(1..=10) as f64 })
        .collect();
    let res = ResourceGraph::new(nodes, links);
    validate_resources(&res).expect("generator builds valid resource graphs");
    res
}

pub fn random_app(m: usize, rng: &mut Rng) -> ApplicationGraph {
    let comps = (0..m)
        .map(|id| ComponentSpec {
            id,
            cpu: rng.random_range(1..=3) as f64,
            gpu: 0.0,
            ram: rng.random_range(1..=3) as f64,
            stor: rng.random_range(0..=2) as f64,
            work: rng.random_range(1..=8) as f64,
            ddl: rng.random_range(3..=15) as f64,
        })
        .collect();
    let edges = random_links(m, 0.2, rng)
        .into_iter()
        .map(|(a, b)| AppEdgeSpec {
            a,
            b,
            max_latency: rng.random_range(3..=20) as f64,
            msg_size: round(rng.random_range(0.5..5.0)),
            min_bandwidth: rng.random_range(1..=4) as f64,
        })
        .collect();
    let app = ApplicationGraph::new(comps, edges);
    validate_application(&app).expect("generator builds valid applications");
    app
}

/// A uniformly random complete placement, retrying dead ends.
pub fn random_placement(app: &ApplicationGraph, res: &ResourceGraph, rng: &mut Rng) -> Option<PlacementState> {
    'attempt: for _ in 0..50 {
        let mut state = PlacementState::new(app, res);
        for c in placement_order(app) {
            let all: Vec<usize> = (0..res.len()).collect();
            let mask = state.action_mask(app, res, c, &all);
            let allowed: Vec<usize> = all.into_iter().filter(|&v| mask.allowed[v]).collect();
            if allowed.is_empty() {
                continue 'attempt;
            }
            state = state.apply(app, res, c, allowed[rng.random_range(0..allowed.len())]).expect("mask admits the node");
        }
        return Some(state);
    }
    None
}

/// Tiny instances (at most 4 components, at most 5 nodes) that admit a
/// complete placement, each with one random placement.
pub fn tiny_instances(count: usize, seed: u64) -> Vec<(ApplicationGraph, ResourceGraph, PlacementState)> {
    let mut rng = seeded(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let res = random_resources(rng.random_range(2..=5), &mut rng);
        let app = random_app(rng.random_range(1..=4), &mut rng);
        if let Some(state) = random_placement(&app, &res, &mut rng) {
            out.push((app, res, state));
        }
    }
    out
}

/// Cheapest simple path by brute-force enumeration; `None` when no path
/// satisfies the bandwidth floor and availability or the cheapest one
/// exceeds the latency bound.
pub fn exhaustive_comm(res: &ResourceGraph, avail: &[bool], edge: &AppEdgeSpec, src: usize, dst: usize) -> Option<f64> {
    if src == dst {
        return Some(0.0);
    }
    if !avail[src] || !avail[dst] {
        return None;
    }
    fn walk(
        res: &ResourceGraph,
        avail: &[bool],
        edge: &AppEdgeSpec,
        at: usize,
        dst: usize,
        seen: &mut Vec<bool>,
        cost: f64,
        best: &mut f64,
    ) {
        if at == dst {
            *best = best.min(cost);
            return;
        }
        for l in res.links() {
            let next = if l.a == at {
                l.b
            } else if l.b == at {
                l.a
            } else {
                continue;
            };
            if seen[next] || !avail[next] || l.bandwidth < edge.min_bandwidth {
                continue;
            }
            seen[next] = true;
            walk(res, avail, edge, next, dst, seen, cost + l.latency + edge.msg_size / l.bandwidth, best);
            seen[next] = false;
        }
    }
    let mut seen = vec![false; res.len()];
    seen[src] = true;
    let mut best = f64::INFINITY;
    walk(res, avail, edge, src, dst, &mut seen, 0.0, &mut best);
    (best.is_finite() && best <= edge.max_latency).then_some(best)
}

/// Metrics recomputed from the raw specifications and the host list alone.
#[derive(Debug)]
pub struct Reference {
    pub ct: Vec<f64>,
    pub ct_app: f64,
    pub ru: f64,
    pub svr: f64,
    pub objective: f64,
}

pub fn reference_metrics(app: &ApplicationGraph, res: &ResourceGraph, hosts: &[usize]) -> Reference {
    let avail = vec![true; res.len()];
    let comps = app.components();
    let mut ct = Vec::new();
    for (c, spec) in comps.iter().enumerate() {
        let node = &res.nodes()[hosts[c]];
        let mut t = node.pt + spec.work / node.speed;
        for e in app.edges() {
            if e.a.max(e.b) == c {
                let (lo, hi) = (e.a.min(e.b), e.a.max(e.b));
                t += exhaustive_comm(res, &avail, e, hosts[lo], hosts[hi]).expect("placement routes every edge");
            }
        }
        ct.push(t);
    }
    let ct_app: f64 = ct.iter().sum();
    let misses = ct.iter().zip(comps).filter(|(t, s)| **t > s.ddl).count();
    let svr = 100.0 * misses as f64 / comps.len() as f64;
    let mut ru = 0.0;
    for (v, node) in res.nodes().iter().enumerate() {
        let caps = [node.cpu, node.gpu, node.ram, node.stor];
        let mut used = [0.0; 4];
        for (c, spec) in comps.iter().enumerate() {
            if hosts[c] == v {
                used[0] += spec.cpu;
                used[1] += spec.gpu;
                used[2] += spec.ram;
                used[3] += spec.stor;
            }
        }
        let dims: Vec<f64> = (0..4).filter(|&d| caps[d] > 0.0).map(|d| used[d] / caps[d]).collect();
        ru += if dims.is_empty() { 0.0 } else { dims.iter().sum::<f64>() / dims.len() as f64 };
    }
    ru /= res.len() as f64;
    let objective = ru - 0.01 * ct_app - 0.02 * svr;
    Reference { ct, ct_app, ru, svr, objective }
}

/// `res` with node `v` renamed to `perm[v]`.
pub fn relabel(res: &ResourceGraph, perm: &[usize]) -> ResourceGraph {
    let mut nodes = res.nodes().to_vec();
    for (v, spec) in res.nodes().iter().enumerate() {
        nodes[perm[v]] = ResourceNodeSpec { id: perm[v], ..spec.clone() };
    }
    let links = res.links().iter().map(|l| ResourceLinkSpec { a: perm[l.a], b: perm[l.b], ..l.clone() }).collect();
    ResourceGraph::new(nodes, links)
}

pub fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.into_iter().collect();
    v.iter().sum::<f64>() / v.len() as f64
}
