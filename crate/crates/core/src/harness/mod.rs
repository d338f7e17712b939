//! Scenarios, availability dynamics, episode orchestration, experiments and
//! report output.

mod compare;
mod dynamics;
mod env;
mod experiment;
mod output;
mod rollout;
mod scenario;

pub use compare::{compare, CompareError, Comparison, ComparisonRow};
pub use dynamics::{apply_dynamics, DynamicsSpec, Flip, FlipEvent};
pub use env::{masked_nodes, AppSlot, ComponentRecord, Environment, EnvironmentConfig, Episode, Zone};
pub use experiment::{
    run_experiment, EpisodeRow, ExperimentError, ExperimentOptions, OracleSummary, PolicySource, RunReport, Summary, METRICS,
};
pub use output::{fmt_f64, to_json, write_json, Table};
pub use rollout::{run_episode, zone_reward, Controller, Delegation, EpisodeOutcome, HeuristicController, RandomController};
pub use scenario::{load_scenario, parse_scenario, PartitionSpec, Scenario, ScenarioError, ScenarioFile, SCHEMA_VERSION};
