//! Hierarchical multi-agent placement of multi-component applications on a
//! Cloud-Edge resource graph.
//!
//! Modules, bottom-up:
//!
//! - [`model`]: application/resource graphs, validation, zone partitioning
//! - [`cost`]: completion time, utilization, SLA violation, objective, rewards
//! - [`placement`]: placement state, routing, masks, heuristics, oracle
//! - [`embedding`]: featurization and the mean-aggregation graph encoder
//! - [`agents`]: local/global policies, episodes, REINFORCE training, replay
//! - [`harness`]: scenarios, dynamics, experiments, reports, comparison

pub mod agents;
pub mod cost;
pub mod embedding;
pub mod harness;
pub mod model;
pub mod placement;
pub mod rng;
