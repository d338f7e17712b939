//! Placement state, constrained routing, action masks, heuristic baselines
//! and the exhaustive oracle.

mod heuristics;
mod oracle;
mod routing;
mod state;

pub use heuristics::{heuristic_place, HeuristicKind, HeuristicPlacer, PlacementFailure};
pub use oracle::{oracle_from, oracle_optimal, OracleError, OracleResult, ORACLE_LIMIT};
pub use routing::{route, Route};
pub use state::{placement_order, ActionMask, PlacementError, PlacementState};
