//! The episode loop shared by learned, heuristic and random controllers.

use rand::Rng as _;
use serde::Serialize;

use super::env::{ComponentRecord, Environment, Episode};
use crate::cost::{global_reward, local_reward, non_local_reward, CostReport};
use crate::model::{ComponentId, ZoneId};
use crate::placement::{ActionMask, HeuristicKind, HeuristicPlacer, PlacementState};
use crate::rng::{seeded, Rng};

/// Decides where applications and their components go.
pub trait Controller {
    /// Zone that receives arrival `arrival`.
    fn delegate(&mut self, ep: &Episode, arrival: usize) -> ZoneId;

    /// Local index of the node that hosts `c`, or `None` when nothing is
    /// feasible. Must pick an allowed entry of `mask`.
    fn place(&mut self, ep: &Episode, c: ComponentId, mask: &ActionMask) -> Option<usize>;

    /// Called after each application with the zone that placed it and that
    /// zone's local reward, or the failure penalty.
    fn application_done(&mut self, _ep: &Episode, _zone: ZoneId, _reward: f64) {}

    fn episode_done(&mut self, _outcome: &EpisodeOutcome) {}
}

/// Metrics and rewards of a finished episode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeOutcome {
    pub report: CostReport,
    pub zone_reports: Vec<CostReport>,
    pub local_rewards: Vec<f64>,
    pub non_local: f64,
    pub global_reward: f64,
    pub failed: bool,
    pub steps: usize,
    pub flips: usize,
    pub records: Vec<ComponentRecord>,
    #[serde(skip)]
    pub state: PlacementState,
}

/// Local reward of `zone` at this point of the episode.
pub fn zone_reward(ep: &Episode, zone: ZoneId) -> f64 {
    if ep.zone_failed(zone) {
        ep.env().failure_penalty
    } else {
        local_reward(&ep.zone_report(zone), &ep.env().weights)
    }
}

/// Runs one episode over `arrivals`. Availability dynamics draw from
/// `dynamics_seed`; all other randomness belongs to the controller.
pub fn run_episode(env: &Environment, arrivals: &[usize], controller: &mut impl Controller, dynamics_seed: u64) -> EpisodeOutcome {
    let mut ep = Episode::new(env, arrivals.to_vec(), dynamics_seed);
    for arrival in 0..arrivals.len() {
        let zone = controller.delegate(&ep, arrival);
        ep.begin(arrival, zone);
        loop {
            let Some(c) = ep.next_decision() else {
                ep.finish();
                break;
            };
            let mask = ep.mask(c);
            match controller.place(&ep, c, &mask) {
                Some(local) => {
                    assert!(mask.allowed[local], "controller chose a masked node");
                    ep.place_local(c, local).expect("unmasked placement is accepted");
                }
                None => {
                    ep.fail();
                    break;
                }
            }
        }
        let reward = zone_reward(&ep, zone);
        controller.application_done(&ep, zone, reward);
        if ep.failed() {
            break;
        }
    }
    let outcome = outcome(&ep);
    controller.episode_done(&outcome);
    outcome
}

fn outcome(ep: &Episode) -> EpisodeOutcome {
    let env = ep.env();
    let report = ep.global_report();
    let zone_reports: Vec<CostReport> = (0..env.zone_count()).map(|z| ep.zone_report(z)).collect();
    let local_rewards: Vec<f64> = (0..env.zone_count()).map(|z| zone_reward(ep, z)).collect();
    let non_local = if ep.failed() { env.failure_penalty } else { non_local_reward(&report, &env.weights) };
    let global_reward = global_reward(non_local, &local_rewards, &env.weights).expect("weights resolved for every zone");
    EpisodeOutcome {
        report,
        zone_reports,
        local_rewards,
        non_local,
        global_reward,
        failed: ep.failed(),
        steps: ep.steps(),
        flips: ep.flips().len(),
        records: ep.records().to_vec(),
        state: ep.state().clone(),
    }
}

/// How a baseline controller picks the zone of each arrival.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delegation {
    Fixed(ZoneId),
    /// Uniform over zones (random controller only).
    Uniform,
}

/// A placement heuristic over the delegated zone's nodes.
pub struct HeuristicController {
    placer: HeuristicPlacer,
    zone: ZoneId,
}

impl HeuristicController {
    pub fn new(kind: HeuristicKind, zone: ZoneId) -> Self {
        Self { placer: HeuristicPlacer::new(kind), zone }
    }
}

impl Controller for HeuristicController {
    fn delegate(&mut self, _ep: &Episode, _arrival: usize) -> ZoneId {
        self.zone
    }

    fn place(&mut self, ep: &Episode, c: ComponentId, mask: &ActionMask) -> Option<usize> {
        if !mask.any() {
            return None;
        }
        let nodes = ep.env().zones[ep.current_zone()].nodes();
        let v = self.placer.choose(ep.state(), ep.current_app(), &ep.env().resources, c, nodes)?;
        nodes.iter().position(|&g| g == v)
    }
}

/// Uniformly random feasible placements.
pub struct RandomController {
    rng: Rng,
    delegation: Delegation,
}

impl RandomController {
    pub fn new(seed: u64, delegation: Delegation) -> Self {
        Self { rng: seeded(seed), delegation }
    }
}

impl Controller for RandomController {
    fn delegate(&mut self, ep: &Episode, _arrival: usize) -> ZoneId {
        match self.delegation {
            Delegation::Fixed(z) => z,
            Delegation::Uniform => self.rng.random_range(0..ep.env().zone_count()),
        }
    }

    fn place(&mut self, _ep: &Episode, _c: ComponentId, mask: &ActionMask) -> Option<usize> {
        let allowed: Vec<usize> = (0..mask.allowed.len()).filter(|&i| mask.allowed[i]).collect();
        if allowed.is_empty() {
            return None;
        }
        Some(allowed[self.rng.random_range(0..allowed.len())])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::objective;
    use crate::harness::EnvironmentConfig;
    use crate::model::fixtures::*;
    use crate::model::Partition;
    use crate::placement::heuristic_place;

    fn env() -> Environment {
        let part = Partition::from_assignment(vec![0, 0, 0, 1, 1, 1], 2).unwrap();
        Environment::new(ring(6), part, vec![chain_app(3)], vec![0], EnvironmentConfig::default()).unwrap()
    }

    #[test]
    fn centralized_heuristic_matches_direct_placement() {
        let e = env().centralized();
        for kind in HeuristicKind::ALL {
            let out = run_episode(&e, &e.arrivals, &mut HeuristicController::new(kind, 0), 0);
            let direct = heuristic_place(e.app(0), &e.resources, kind).unwrap();
            assert_eq!(out.state.hosts(), direct.hosts());
            let expected = CostReport::evaluate(e.app(0), &e.resources, &direct, &e.weights).unwrap();
            assert_eq!(out.report.objective, expected.objective);
            assert_eq!(out.report.objective, objective(&out.report, &e.weights));
        }
    }

    #[test]
    fn global_reward_combines_zone_rewards() {
        let e = env();
        let out = run_episode(&e, &e.arrivals, &mut RandomController::new(3, Delegation::Fixed(1)), 0);
        assert!(!out.failed);
        assert!(out.records.iter().all(|r| r.zone == 1));
        let expected = out.non_local + 0.5 * out.local_rewards[0] + 0.5 * out.local_rewards[1];
        assert!((out.global_reward - expected).abs() < 1e-15);
        assert_eq!(out.steps, 3);
    }

    #[test]
    fn failure_flows_into_rewards() {
        let big = crate::model::ApplicationGraph::new(vec![comp(0, 100.0, 1.0, 10.0)], vec![]);
        let part = Partition::from_assignment(vec![0, 0, 0, 1, 1, 1], 2).unwrap();
        let e = Environment::new(ring(6), part, vec![big], vec![0], EnvironmentConfig::default()).unwrap();
        let out = run_episode(&e, &e.arrivals, &mut HeuristicController::new(HeuristicKind::FirstFit, 0), 0);
        assert!(out.failed);
        assert_eq!(out.local_rewards[0], -1.0);
        assert_eq!(out.non_local, -1.0);
        assert_eq!(out.report.svr, 100.0);
        assert_eq!(out.steps, 0);
    }
}
