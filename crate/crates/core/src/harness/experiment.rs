//! Repeated evaluation episodes and the run report they produce.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::env::Environment;
use super::output::{fmt_f64, Table};
use super::rollout::{run_episode, Delegation, EpisodeOutcome, HeuristicController, RandomController};
use super::scenario::{Scenario, ScenarioFile};
use crate::agents::{run_centralized_episode, run_global_episode, Checkpoint, CheckpointError, Mode};
use crate::embedding::FeatureScale;
use crate::placement::{oracle_from, HeuristicKind, OracleError, PlacementState};
use crate::rng::{derive, stream};

/// Where placement decisions come from.
#[derive(Debug, Clone)]
pub enum PolicySource {
    Heuristic(HeuristicKind),
    Random,
    Checkpoint(Box<Checkpoint>),
}

impl PolicySource {
    pub fn label(&self) -> String {
        match self {
            PolicySource::Heuristic(k) => k.to_string(),
            PolicySource::Random => "random".into(),
            PolicySource::Checkpoint(ck) if ck.global.is_some() => "trained".into(),
            PolicySource::Checkpoint(ck) => format!("trained_zone{}", ck.locals[0].zone),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOptions {
    pub episodes: usize,
    pub seed: u64,
    /// Argmax instead of sampling for checkpoint policies.
    pub greedy: bool,
    /// Solve the first arrival exactly and report the gap to it.
    pub oracle: bool,
    /// Distribute episodes over the rayon pool.
    pub parallel: bool,
    /// Record wall-clock seconds per episode. Makes reports non-reproducible.
    pub wall_clock: bool,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self { episodes: 1, seed: 0, greedy: false, oracle: false, parallel: false, wall_clock: false }
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("oracle unavailable: {0}")]
    Oracle(String),
    #[error("at least one episode is required")]
    NoEpisodes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub episode: usize,
    pub seed: u64,
    pub objective: f64,
    pub ru: f64,
    pub ct_app: f64,
    pub svr: f64,
    pub global_reward: f64,
    pub non_local_reward: f64,
    pub local_rewards: Vec<f64>,
    pub failed: bool,
    pub steps: usize,
    pub flips: usize,
    pub placed: usize,
    pub memory_bytes: usize,
    pub wall_clock_seconds: Option<f64>,
}

impl EpisodeRow {
    fn metric(&self, name: &str) -> f64 {
        match name {
            "objective" => self.objective,
            "ru" => self.ru,
            "ct_app" => self.ct_app,
            "svr" => self.svr,
            "global_reward" => self.global_reward,
            "failed" => f64::from(u8::from(self.failed)),
            _ => unreachable!("unknown metric {name}"),
        }
    }
}

/// Metrics summarized across episodes, in report order.
pub const METRICS: [&str; 6] = ["objective", "ru", "ct_app", "svr", "global_reward", "failed"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = if xs.len() > 1 { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
        let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { mean, sd, min, max }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub objective: f64,
    pub hosts: Vec<Option<usize>>,
    pub feasible_assignments: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub code_version: String,
    pub policy: String,
    pub mode: Mode,
    pub seed: u64,
    pub scenario: ScenarioFile,
    pub partition: Vec<usize>,
    pub feature_scale: FeatureScale,
    pub episodes: Vec<EpisodeRow>,
    pub summary: BTreeMap<String, Summary>,
    pub oracle: Option<OracleSummary>,
    /// Oracle objective minus mean objective.
    pub optimality_gap: Option<f64>,
    /// Largest per-episode memory estimate.
    pub peak_memory_bytes: usize,
}

impl RunReport {
    /// One row per episode.
    pub fn episode_table(&self) -> Table {
        let zones = self.episodes.first().map_or(0, |r| r.local_rewards.len());
        let mut header: Vec<String> = ["episode", "seed", "objective", "ru", "ct_app", "svr", "global_reward", "non_local_reward"]
            .into_iter()
            .map(String::from)
            .collect();
        header.extend((0..zones).map(|z| format!("local_reward_{z}")));
        header.extend(["failed", "steps", "flips", "placed", "memory_bytes", "wall_clock_seconds"].map(String::from));
        let mut t = Table::new(header);
        for r in &self.episodes {
            let mut row = vec![r.episode.to_string(), r.seed.to_string()];
            row.extend([r.objective, r.ru, r.ct_app, r.svr, r.global_reward, r.non_local_reward].map(fmt_f64));
            row.extend(r.local_rewards.iter().copied().map(fmt_f64));
            row.extend([r.failed.to_string(), r.steps.to_string(), r.flips.to_string(), r.placed.to_string(), r.memory_bytes.to_string()]);
            row.push(r.wall_clock_seconds.map(fmt_f64).unwrap_or_default());
            t.push(row);
        }
        t
    }

    /// One row per summarized metric.
    pub fn summary_table(&self) -> Table {
        let mut t = Table::new(["policy", "metric", "mean", "sd", "min", "max"]);
        for (name, s) in &self.summary {
            t.push(vec![self.policy.clone(), name.clone(), fmt_f64(s.mean), fmt_f64(s.sd), fmt_f64(s.min), fmt_f64(s.max)]);
        }
        t
    }
}

fn state_bytes(env: &Environment) -> usize {
    // Per node: capacity, residual and allocation vectors plus the availability flag.
    let nodes = env.resources.len() * (3 * 4 * 8 + 1);
    let comps: usize = env.arrivals.iter().map(|&a| env.app(a).len()).sum();
    nodes + comps * (8 + 8)
}

fn row(episode: usize, seed: u64, out: &EpisodeOutcome, memory_bytes: usize, wall: Option<f64>) -> EpisodeRow {
    EpisodeRow {
        episode,
        seed,
        objective: out.report.objective,
        ru: out.report.ru,
        ct_app: out.report.ct_app,
        svr: out.report.svr,
        global_reward: out.global_reward,
        non_local_reward: out.non_local,
        local_rewards: out.local_rewards.clone(),
        failed: out.failed,
        steps: out.steps,
        flips: out.flips,
        placed: out.records.len(),
        memory_bytes,
        wall_clock_seconds: wall,
    }
}

fn run_one(
    env: &Environment,
    central: &Environment,
    source: &PolicySource,
    mode: Mode,
    episode: usize,
    seed: u64,
    wall_clock: bool,
) -> EpisodeRow {
    let start = wall_clock.then(Instant::now);
    let base = state_bytes(env);
    let dynamics_seed = derive(seed, &[stream::DYNAMICS]);
    let (out, bytes) = match source {
        PolicySource::Heuristic(kind) => {
            (run_episode(central, &central.arrivals, &mut HeuristicController::new(*kind, 0), dynamics_seed), base)
        }
        PolicySource::Random => {
            let mut ctl = RandomController::new(derive(seed, &[stream::POLICY]), Delegation::Fixed(0));
            (run_episode(central, &central.arrivals, &mut ctl, dynamics_seed), base)
        }
        PolicySource::Checkpoint(ck) => {
            let rollout = match &ck.global {
                Some(g) => run_global_episode(env, g, &ck.locals, mode, seed),
                None => run_centralized_episode(env, &ck.locals[0], mode, seed),
            };
            let bytes = base + ck.parameter_bytes() + rollout.observation_bytes();
            (rollout.outcome, bytes)
        }
    };
    row(episode, seed, &out, bytes, start.map(|t| t.elapsed().as_secs_f64()))
}

fn oracle(scenario: &Scenario, env: &Environment) -> Result<OracleSummary, ExperimentError> {
    if env.arrivals.len() != 1 {
        return Err(ExperimentError::Oracle(format!("scenario has {} arrivals, the oracle solves exactly one", env.arrivals.len())));
    }
    if !scenario.file.dynamics.is_static() {
        return Err(ExperimentError::Oracle("availability dynamics are enabled".into()));
    }
    let app = env.app(env.arrivals[0]);
    let mut start = PlacementState::new(app, &env.resources);
    for (v, &a) in env.initial_avail.iter().enumerate() {
        start.set_available(v, a);
    }
    let best = oracle_from(app, &env.resources, &start, &env.weights).map_err(|e: OracleError| ExperimentError::Oracle(e.to_string()))?;
    Ok(OracleSummary { objective: best.objective, hosts: best.state.hosts().to_vec(), feasible_assignments: best.feasible })
}

/// Evaluates `source` for `opts.episodes` episodes. Episode `i` uses seed
/// `derive(opts.seed, [EPISODE, i])`, so sequential and parallel runs agree.
/// Heuristic and random sources place over the whole graph as one zone.
pub fn run_experiment(scenario: &Scenario, source: &PolicySource, opts: &ExperimentOptions) -> Result<RunReport, ExperimentError> {
    if opts.episodes == 0 {
        return Err(ExperimentError::NoEpisodes);
    }
    let env = scenario.environment();
    if let PolicySource::Checkpoint(ck) = source {
        ck.validate(env.zone_count())?;
    }
    let oracle = opts.oracle.then(|| oracle(scenario, &env)).transpose()?;
    let central = env.centralized();
    let mode = if opts.greedy { Mode::Greedy } else { Mode::Sample };
    let seeds: Vec<(usize, u64)> = (0..opts.episodes).map(|i| (i, derive(opts.seed, &[stream::EPISODE, i as u64]))).collect();
    let job = |&(i, s): &(usize, u64)| run_one(&env, &central, source, mode, i, s, opts.wall_clock);
    let episodes: Vec<EpisodeRow> = if opts.parallel { seeds.par_iter().map(job).collect() } else { seeds.iter().map(job).collect() };

    let summary: BTreeMap<String, Summary> =
        METRICS.iter().map(|&m| (m.to_string(), Summary::of(&episodes.iter().map(|r| r.metric(m)).collect::<Vec<_>>()))).collect();
    let optimality_gap = oracle.as_ref().map(|o| o.objective - summary["objective"].mean);
    let peak_memory_bytes = episodes.iter().map(|r| r.memory_bytes).max().unwrap_or(0);
    Ok(RunReport {
        code_version: env!("CARGO_PKG_VERSION").into(),
        policy: source.label(),
        mode,
        seed: opts.seed,
        scenario: scenario.file.clone(),
        partition: (0..env.resources.len()).map(|v| scenario.partition.zone_of(v)).collect(),
        feature_scale: env.scale.clone(),
        episodes,
        summary,
        oracle,
        optimality_gap,
        peak_memory_bytes,
    })
}
