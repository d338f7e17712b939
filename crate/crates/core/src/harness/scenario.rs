//! Scenario files: strict JSON parsing and whole-file validation.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dynamics::DynamicsSpec;
use super::env::{Environment, EnvironmentConfig};
use crate::agents::TrainConfig;
use crate::cost::MetricWeights;
use crate::model::{partition_resources, validate_application, validate_resources, ApplicationGraph, Partition, ResourceGraph};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PartitionSpec {
    pub zones: usize,
    pub seed: u64,
}

impl Default for PartitionSpec {
    fn default() -> Self {
        Self { zones: 1, seed: 0 }
    }
}

/// The on-disk scenario format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub resources: ResourceGraph,
    #[serde(default)]
    pub partition: PartitionSpec,
    pub applications: Vec<ApplicationGraph>,
    /// Application indices in arrival order; every application once when absent.
    #[serde(default)]
    pub arrivals: Option<Vec<usize>>,
    /// Percentage of nodes (highest ids first) unavailable at episode start.
    #[serde(default)]
    pub masked_node_pct: f64,
    #[serde(default)]
    pub dynamics: DynamicsSpec,
    #[serde(default)]
    pub weights: MetricWeights,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: String, line: usize, column: usize, message: String },
    #[error("{path}: {} problem(s): {}", .problems.len(), .problems.join("; "))]
    Invalid { path: String, problems: Vec<String> },
}

impl ScenarioError {
    /// Individual problems (one entry for I/O and parse errors).
    pub fn problems(&self) -> Vec<String> {
        match self {
            ScenarioError::Invalid { problems, .. } => problems.clone(),
            other => vec![other.to_string()],
        }
    }
}

/// A validated scenario with its computed partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub partition: Partition,
}

impl Scenario {
    /// Validates `file`, collecting every problem.
    pub fn from_file(file: ScenarioFile, origin: &str) -> Result<Self, ScenarioError> {
        let problems = problems(&file);
        if !problems.is_empty() {
            return Err(ScenarioError::Invalid { path: origin.into(), problems });
        }
        let partition = partition_resources(&file.resources, file.partition.zones, file.partition.seed)
            .map_err(|e| ScenarioError::Invalid { path: origin.into(), problems: vec![format!("partition: {e}")] })?;
        Ok(Self { file, partition })
    }

    pub fn arrivals(&self) -> Vec<usize> {
        self.file.arrivals.clone().unwrap_or_else(|| (0..self.file.applications.len()).collect())
    }

    pub fn environment(&self) -> Environment {
        let f = &self.file;
        Environment::new(
            f.resources.clone(),
            self.partition.clone(),
            f.applications.clone(),
            self.arrivals(),
            EnvironmentConfig {
                weights: f.weights.clone(),
                dynamics: f.dynamics.clone(),
                masked_node_pct: f.masked_node_pct,
                failure_penalty: f.train.failure_penalty,
            },
        )
        .expect("partition validated at load")
    }
}

fn problems(f: &ScenarioFile) -> Vec<String> {
    let mut out = Vec::new();
    if f.schema_version != SCHEMA_VERSION {
        out.push(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", f.schema_version));
    }
    if let Err(errs) = validate_resources(&f.resources) {
        out.extend(errs.iter().map(|e| format!("resources: {e}")));
    }
    if f.applications.is_empty() {
        out.push("applications: at least one application is required".into());
    }
    for (i, app) in f.applications.iter().enumerate() {
        if let Err(errs) = validate_application(app) {
            out.extend(errs.iter().map(|e| format!("applications[{i}]: {e}")));
        }
    }
    if let Some(arrivals) = &f.arrivals {
        if arrivals.is_empty() {
            out.push("arrivals: at least one arrival is required".into());
        }
        for (k, &a) in arrivals.iter().enumerate() {
            if a >= f.applications.len() {
                out.push(format!("arrivals[{k}] = {a} references a missing application"));
            }
        }
    }
    if !(0.0..=100.0).contains(&f.masked_node_pct) {
        out.push(format!("masked_node_pct = {} must lie in [0, 100]", f.masked_node_pct));
    }
    let n = f.resources.len();
    if f.partition.zones == 0 || f.partition.zones > n.max(1) {
        out.push(format!("partition.zones = {} must lie in [1, {n}]", f.partition.zones));
    }
    for (k, ev) in f.dynamics.schedule.iter().enumerate() {
        if ev.node >= n {
            out.push(format!("dynamics.schedule[{k}] references missing node {}", ev.node));
        }
        if k > 0 && ev.step < f.dynamics.schedule[k - 1].step {
            out.push(format!("dynamics.schedule[{k}] step {} precedes the previous event", ev.step));
        }
    }
    if !(0.0..=1.0).contains(&f.dynamics.toggle_rate) {
        out.push(format!("dynamics.toggle_rate = {} must lie in [0, 1]", f.dynamics.toggle_rate));
    }
    out.extend(f.weights.problems(f.partition.zones));
    out.extend(f.train.problems());
    out
}

/// Parses and validates scenario JSON; `origin` labels error messages.
pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
        path: origin.into(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    Scenario::from_file(file, origin)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let origin = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: origin.clone(), source })?;
    parse_scenario(&text, &origin)
}
