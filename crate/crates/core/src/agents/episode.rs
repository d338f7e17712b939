//! Policy-driven episodes that record trajectories.

use super::policy::{global_observe, local_observe, GlobalObservation, GlobalPolicy, LocalObservation, LocalPolicy, Policy};
use super::sampling::{act, ActError, Mode};
use super::trajectory::Trajectory;
use crate::harness::{run_episode, Controller, Environment, Episode, EpisodeOutcome};
use crate::model::{ComponentId, ZoneId};
use crate::placement::ActionMask;
use crate::rng::{derive, seeded, stream, Rng};

/// Trajectories and metrics of one policy-driven episode.
#[derive(Debug, Clone)]
pub struct Rollout {
    /// One step per arrival; empty when delegation was fixed.
    pub global: Trajectory<GlobalObservation>,
    /// One trajectory per arrival, tagged with the zone that placed it.
    pub locals: Vec<(ZoneId, Trajectory<LocalObservation>)>,
    pub outcome: EpisodeOutcome,
}

impl Rollout {
    /// Bytes held by the recorded observations.
    pub fn observation_bytes(&self) -> usize {
        let g: usize = self.global.steps.iter().map(|s| GlobalPolicy::observation_bytes(&s.observation)).sum();
        let l: usize = self.locals.iter().flat_map(|(_, t)| &t.steps).map(|s| LocalPolicy::observation_bytes(&s.observation)).sum();
        g + l
    }
}

struct PolicyController<'a> {
    global: Option<&'a GlobalPolicy>,
    fixed_zone: ZoneId,
    locals: &'a [LocalPolicy],
    mode: Mode,
    rng: Rng,
    global_trajectory: Trajectory<GlobalObservation>,
    local_trajectories: Vec<(ZoneId, Trajectory<LocalObservation>)>,
    current: Trajectory<LocalObservation>,
}

impl<'a> PolicyController<'a> {
    fn new(global: Option<&'a GlobalPolicy>, fixed_zone: ZoneId, locals: &'a [LocalPolicy], mode: Mode, seed: u64) -> Self {
        Self {
            global,
            fixed_zone,
            locals,
            mode,
            rng: seeded(derive(seed, &[stream::POLICY])),
            global_trajectory: Trajectory::default(),
            local_trajectories: Vec::new(),
            current: Trajectory::default(),
        }
    }

    fn local(&self, zone: ZoneId) -> &'a LocalPolicy {
        self.locals.iter().find(|p| p.zone == zone).unwrap_or_else(|| panic!("no local policy for zone {zone}"))
    }
}

impl Controller for PolicyController<'_> {
    fn delegate(&mut self, ep: &Episode, arrival: usize) -> ZoneId {
        let Some(global) = self.global else { return self.fixed_zone };
        let obs = global_observe(ep.env(), ep.arrivals()[arrival], ep.state());
        let scores = global.scores(&obs);
        let d = act(&scores, &obs.mask, self.mode, &mut self.rng).expect("every zone is selectable");
        self.global_trajectory.push(obs, Some(d));
        d.action
    }

    fn place(&mut self, ep: &Episode, c: ComponentId, mask: &ActionMask) -> Option<usize> {
        let zone = ep.current_zone();
        let obs = local_observe(ep.env(), zone, ep.current_slot(), ep.state(), c, mask.allowed.clone());
        let scores = self.local(zone).scores(&obs);
        match act(&scores, &obs.mask, self.mode, &mut self.rng) {
            Ok(d) => {
                self.current.push(obs, Some(d));
                Some(d.action)
            }
            Err(ActError::NoFeasibleAction) => {
                self.current.push(obs, None);
                None
            }
            Err(e) => panic!("{e}"),
        }
    }

    fn application_done(&mut self, _ep: &Episode, zone: ZoneId, reward: f64) {
        let mut t = std::mem::take(&mut self.current);
        t.terminate(reward);
        self.local_trajectories.push((zone, t));
    }

    fn episode_done(&mut self, outcome: &EpisodeOutcome) {
        if !self.global_trajectory.is_empty() {
            self.global_trajectory.terminate(outcome.global_reward);
        }
    }
}

fn finish(env: &Environment, arrivals: &[usize], mut ctl: PolicyController, seed: u64) -> Rollout {
    let outcome = run_episode(env, arrivals, &mut ctl, derive(seed, &[stream::DYNAMICS]));
    Rollout { global: ctl.global_trajectory, locals: ctl.local_trajectories, outcome }
}

/// Places application `slot` inside `zone` with a local policy.
pub fn run_local_episode(env: &Environment, zone: ZoneId, slot: usize, policy: &LocalPolicy, mode: Mode, seed: u64) -> Rollout {
    let ctl = PolicyController::new(None, zone, std::slice::from_ref(policy), mode, seed);
    finish(env, &[slot], ctl, seed)
}

/// Runs the scenario's arrivals with the global policy delegating each
/// application to one zone's local policy.
pub fn run_global_episode(env: &Environment, global: &GlobalPolicy, locals: &[LocalPolicy], mode: Mode, seed: u64) -> Rollout {
    let ctl = PolicyController::new(Some(global), 0, locals, mode, seed);
    finish(env, &env.arrivals, ctl, seed)
}

/// Runs the scenario's arrivals with a single agent over one zone, without
/// any delegation step.
pub fn run_centralized_episode(env: &Environment, policy: &LocalPolicy, mode: Mode, seed: u64) -> Rollout {
    let ctl = PolicyController::new(None, policy.zone, std::slice::from_ref(policy), mode, seed);
    finish(env, &env.arrivals, ctl, seed)
}
