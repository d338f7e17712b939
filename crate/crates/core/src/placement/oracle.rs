//! Exhaustive search for the objective-maximizing placement of tiny instances.

use thiserror::Error;

use super::state::PlacementState;
use crate::cost::{CostReport, MetricWeights};
use crate::model::{ApplicationGraph, ResourceGraph};

/// Largest `|V|^|C|` the oracle will enumerate.
pub const ORACLE_LIMIT: f64 = 1e7;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("instance too large: {nodes}^{components} assignments exceeds 1e7")]
    TooLarge { nodes: usize, components: usize },
    #[error("no feasible assignment exists")]
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub state: PlacementState,
    pub report: CostReport,
    pub objective: f64,
    /// Number of complete feasible assignments visited.
    pub feasible: usize,
}

/// Enumerates every assignment of `app` onto `start` (lexicographic in
/// component-id order) and returns the first one achieving the maximum
/// objective.
///
/// Infeasible prefixes are pruned: feasibility of a complete assignment does
/// not depend on the order in which components are applied, so a prefix that
/// violates capacity, availability or a route bound has no feasible
/// completion.
pub fn oracle_optimal(app: &ApplicationGraph, res: &ResourceGraph, w: &MetricWeights) -> Result<OracleResult, OracleError> {
    oracle_from(app, res, &PlacementState::new(app, res), w)
}

/// As [`oracle_optimal`], starting from an existing (empty) placement state.
pub fn oracle_from(
    app: &ApplicationGraph,
    res: &ResourceGraph,
    start: &PlacementState,
    w: &MetricWeights,
) -> Result<OracleResult, OracleError> {
    let (n, m) = (res.len(), app.len());
    if (n as f64).powi(m as i32) > ORACLE_LIMIT {
        return Err(OracleError::TooLarge { nodes: n, components: m });
    }
    let mut best: Option<OracleResult> = None;
    let mut feasible = 0;
    search(app, res, w, start.clone(), 0, &mut best, &mut feasible);
    let mut best = best.ok_or(OracleError::Infeasible)?;
    best.feasible = feasible;
    Ok(best)
}

fn search(
    app: &ApplicationGraph,
    res: &ResourceGraph,
    w: &MetricWeights,
    state: PlacementState,
    c: usize,
    best: &mut Option<OracleResult>,
    feasible: &mut usize,
) {
    if c == app.len() {
        *feasible += 1;
        let report = CostReport::evaluate(app, res, &state, w).expect("complete assignment");
        let objective = report.objective;
        if best.as_ref().is_none_or(|b| objective > b.objective) {
            *best = Some(OracleResult { state, report, objective, feasible: 0 });
        }
        return;
    }
    for v in 0..res.len() {
        if let Ok(next) = state.apply(app, res, c, v) {
            search(app, res, w, next, c + 1, best, feasible);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;
    use crate::model::{ApplicationGraph, ResourceGraph};
    use crate::placement::{heuristic_place, HeuristicKind};

    #[test]
    fn symmetric_nodes_tie_break_to_first() {
        let res = ResourceGraph::new(vec![node(0, 2.0, 1.0, 1.0), node(1, 2.0, 1.0, 1.0)], vec![link(0, 1, 1.0, 1.0)]);
        let app = ApplicationGraph::new(vec![comp(0, 1.0, 1.0, 10.0)], vec![]);
        let r = oracle_optimal(&app, &res, &MetricWeights::default()).unwrap();
        assert_eq!(r.state.host(0), Some(0));
        assert_eq!(r.feasible, 2);
    }

    #[test]
    fn infeasible_instance() {
        let res = ResourceGraph::new(vec![node(0, 2.0, 1.0, 1.0)], vec![]);
        let app = ApplicationGraph::new(vec![comp(0, 3.0, 1.0, 10.0)], vec![]);
        assert_eq!(oracle_optimal(&app, &res, &MetricWeights::default()), Err(OracleError::Infeasible));
    }

    #[test]
    fn size_guard() {
        let res = grid(4, 4);
        let app = chain_app(6);
        assert_eq!(oracle_optimal(&app, &res, &MetricWeights::default()), Err(OracleError::TooLarge { nodes: 16, components: 6 }));
    }

    #[test]
    fn dominates_heuristics_on_small_grid() {
        let mut nodes: Vec<_> = (0..4).map(|i| node(i, 2.0 + i as f64, 1.0 + i as f64, 1.0 + 0.5 * i as f64)).collect();
        nodes[0].pt = 9.0;
        let res = ResourceGraph::new(nodes, vec![link(0, 1, 1.0, 5.0), link(1, 2, 2.0, 5.0), link(2, 3, 1.0, 5.0), link(3, 0, 3.0, 5.0)]);
        let app = chain_app(3);
        let w = MetricWeights::default();
        let best = oracle_optimal(&app, &res, &w).unwrap();
        for kind in HeuristicKind::ALL {
            let s = heuristic_place(&app, &res, kind).unwrap();
            let obj = CostReport::evaluate(&app, &res, &s, &w).unwrap().objective;
            assert!(obj <= best.objective + 1e-9, "{kind}: {obj} > {}", best.objective);
        }
    }
}
