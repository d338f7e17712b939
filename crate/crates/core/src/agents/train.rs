//! REINFORCE with a moving-average return baseline: zone-local pretraining
//! followed by joint training of the global and local policies.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::episode::{run_global_episode, run_local_episode, Rollout};
use super::loss::{surrogate_grad, LossConfig, Sample};
use super::optim::{clip_grad_norm, Adam};
use super::policy::{GlobalObservation, GlobalPolicy, LocalObservation, LocalPolicy, Policy};
use super::sampling::{masked_log_softmax, Mode};
use super::trajectory::{ReplayBuffer, Trajectory};
use crate::embedding::Parameters;
use crate::harness::{Environment, EpisodeOutcome};
use crate::model::ZoneId;
use crate::rng::{derive, seeded, stream};

const PHASE_PRETRAIN: u64 = 1;
const PHASE_JOINT: u64 = 2;

/// Bounds on the importance weight of replayed decisions.
pub const IMPORTANCE_CLIP: (f64, f64) = (0.1, 10.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub discount: f64,
    pub pretrain_episodes: usize,
    pub joint_episodes: usize,
    /// Episodes per parameter update.
    pub batch_size: usize,
    pub entropy_coef: f64,
    /// Fraction of each local batch drawn from the pretraining replay buffer.
    pub replay_mix: f64,
    pub replay_capacity: usize,
    /// Global gradient-norm bound; 0 disables clipping.
    pub grad_clip: f64,
    /// Step size of the moving-average return baseline.
    pub baseline_momentum: f64,
    /// Terminal reward of an episode that hits a dead end.
    pub failure_penalty: f64,
    pub ppo_clip: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            discount: 1.0,
            pretrain_episodes: 200,
            joint_episodes: 300,
            batch_size: 4,
            entropy_coef: 0.01,
            replay_mix: 0.5,
            replay_capacity: 1000,
            grad_clip: 1.0,
            baseline_momentum: 0.1,
            failure_penalty: -1.0,
            ppo_clip: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Problems with the configuration; empty when valid.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.learning_rate < 0.0 || !self.learning_rate.is_finite() {
            out.push(format!("train.learning_rate = {} must be finite and >= 0", self.learning_rate));
        }
        for (name, v) in [("discount", self.discount), ("replay_mix", self.replay_mix), ("baseline_momentum", self.baseline_momentum)] {
            if !(0.0..=1.0).contains(&v) {
                out.push(format!("train.{name} = {v} must lie in [0, 1]"));
            }
        }
        if self.batch_size == 0 {
            out.push("train.batch_size must be >= 1".into());
        }
        for (name, v) in [("entropy_coef", self.entropy_coef), ("grad_clip", self.grad_clip)] {
            if v < 0.0 || !v.is_finite() {
                out.push(format!("train.{name} = {v} must be finite and >= 0"));
            }
        }
        if !self.failure_penalty.is_finite() {
            out.push("train.failure_penalty must be finite".into());
        }
        if let Some(e) = self.ppo_clip {
            if !(e > 0.0 && e < 1.0) {
                out.push(format!("train.ppo_clip = {e} must lie in (0, 1)"));
            }
        }
        out
    }

    fn loss(&self) -> LossConfig {
        LossConfig { entropy_coef: self.entropy_coef, ppo_clip: self.ppo_clip }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("training diverged at update {update}: {what} is not finite")]
    Diverged { update: usize, what: &'static str },
    #[error("expected {expected} local policies and replay buffers, got {got}")]
    PolicyCount { expected: usize, got: usize },
}

/// Fresh local policy for `zone`, seeded from the master seed.
pub fn init_local(zone: ZoneId, seed: u64) -> LocalPolicy {
    LocalPolicy::new(zone, &mut seeded(derive(seed, &[stream::INIT, 1, zone as u64])))
}

/// Fresh global policy over `zones` zones, seeded from the master seed.
pub fn init_global(zones: usize, seed: u64) -> GlobalPolicy {
    GlobalPolicy::new(zones, &mut seeded(derive(seed, &[stream::INIT, 2])))
}

/// A policy with its optimizer and return baseline.
#[derive(Debug, Clone)]
pub struct Learner<P: Policy> {
    pub policy: P,
    adam: Adam,
    baseline: Option<f64>,
    updates: usize,
}

/// Diagnostics of one update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpdateStats {
    pub loss: f64,
    pub grad_norm: f64,
    pub baseline: f64,
    pub samples: usize,
}

impl<P: Policy> Learner<P> {
    pub fn new(policy: P, lr: f64) -> Self {
        let n = policy.param_count();
        Self { policy, adam: Adam::new(lr, n), baseline: None, updates: 0 }
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    /// Optimizer state bytes.
    pub fn optimizer_bytes(&self) -> usize {
        2 * 8 * self.policy.param_count()
    }

    /// One policy-gradient step on `batch`. Replayed trajectories (flag set)
    /// are reweighted by the clipped ratio of current to stored action
    /// probabilities. The loss is averaged over trajectories.
    pub fn update(&mut self, batch: &[(&Trajectory<P::Obs>, bool)], config: &TrainConfig) -> Result<UpdateStats, TrainError> {
        self.updates += 1;
        let update = self.updates;
        if batch.is_empty() {
            return Ok(UpdateStats { loss: 0.0, grad_norm: 0.0, baseline: self.baseline.unwrap_or(0.0), samples: 0 });
        }
        let mean_return = batch.iter().map(|(t, _)| t.episode_return).sum::<f64>() / batch.len() as f64;
        let b = *self.baseline.get_or_insert(mean_return);
        let mut samples: Vec<Sample<P::Obs>> = Vec::new();
        for (traj, replayed) in batch {
            let returns = traj.returns(config.discount);
            for (step, g) in traj.steps.iter().zip(returns) {
                let Some(d) = step.decision else { continue };
                let weight = if *replayed {
                    let current = masked_log_softmax(&self.policy.scores(&step.observation), P::action_mask(&step.observation))[d.action];
                    (current - d.log_prob).exp().clamp(IMPORTANCE_CLIP.0, IMPORTANCE_CLIP.1)
                } else {
                    1.0
                };
                samples.push(Sample {
                    obs: step.observation.clone(),
                    action: d.action,
                    advantage: g - b,
                    weight,
                    old_log_prob: d.log_prob,
                });
            }
        }
        let (loss, mut grads) = surrogate_grad(&self.policy, &samples, &config.loss());
        let scale = 1.0 / batch.len() as f64;
        for t in grads.tensors_mut() {
            t.data.iter_mut().for_each(|x| *x *= scale);
        }
        let loss = loss * scale;
        if !loss.is_finite() {
            return Err(TrainError::Diverged { update, what: "loss" });
        }
        if !grads.all_finite() {
            return Err(TrainError::Diverged { update, what: "gradient" });
        }
        let grad_norm = clip_grad_norm(&mut grads, config.grad_clip);
        self.adam.step(&mut self.policy, &grads);
        if !self.policy.all_finite() {
            return Err(TrainError::Diverged { update, what: "parameters" });
        }
        self.baseline = Some(b + config.baseline_momentum * (mean_return - b));
        Ok(UpdateStats { loss, grad_norm, baseline: b, samples: samples.len() })
    }
}

/// Per-episode record of a training or evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeStats {
    pub episode: usize,
    pub zone: Option<ZoneId>,
    /// Reward optimized by the trained agent: the zone's local reward in
    /// pretraining, the global reward in joint training.
    pub reward: f64,
    pub global_reward: f64,
    pub local_rewards: Vec<f64>,
    pub objective: f64,
    pub ru: f64,
    pub ct_app: f64,
    pub svr: f64,
    pub failed: bool,
    pub steps: usize,
}

impl EpisodeStats {
    pub fn from_outcome(episode: usize, zone: Option<ZoneId>, reward: f64, o: &EpisodeOutcome) -> Self {
        Self {
            episode,
            zone,
            reward,
            global_reward: o.global_reward,
            local_rewards: o.local_rewards.clone(),
            objective: o.report.objective,
            ru: o.report.ru,
            ct_app: o.report.ct_app,
            svr: o.report.svr,
            failed: o.failed,
            steps: o.steps,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    pub policy: LocalPolicy,
    pub replay: ReplayBuffer<LocalObservation>,
    pub curve: Vec<EpisodeStats>,
    pub updates: Vec<UpdateStats>,
    pub optimizer_bytes: usize,
}

fn check_config(config: &TrainConfig) -> Result<(), TrainError> {
    let problems = config.problems();
    if problems.is_empty() {
        Ok(())
    } else {
        Err(TrainError::Config(problems))
    }
}

fn batches(total: usize, size: usize) -> impl Iterator<Item = std::ops::Range<usize>> {
    (0..total).step_by(size).map(move |s| s..(s + size).min(total))
}

/// Phase 1: trains `policy` on its own zone, cycling through the scenario's
/// applications, and keeps every trajectory in a replay buffer.
pub fn pretrain_local(env: &Environment, policy: LocalPolicy, config: &TrainConfig) -> Result<PretrainOutcome, TrainError> {
    check_config(config)?;
    let zone = policy.zone;
    let mut learner = Learner::new(policy, config.learning_rate);
    let mut replay = ReplayBuffer::new(config.replay_capacity, derive(config.seed, &[stream::REPLAY, zone as u64]));
    let mut curve = Vec::with_capacity(config.pretrain_episodes);
    let mut updates = Vec::new();
    for range in batches(config.pretrain_episodes, config.batch_size) {
        let rollouts: Vec<Rollout> = range
            .clone()
            .into_par_iter()
            .map(|k| {
                let slot = k % env.apps.len();
                let seed = derive(config.seed, &[stream::EPISODE, PHASE_PRETRAIN, zone as u64, k as u64]);
                run_local_episode(env, zone, slot, &learner.policy, Mode::Sample, seed)
            })
            .collect();
        let trajs: Vec<&Trajectory<LocalObservation>> = rollouts.iter().map(|r| &r.locals[0].1).collect();
        for (k, (r, t)) in range.zip(rollouts.iter().zip(&trajs)) {
            curve.push(EpisodeStats::from_outcome(k, Some(zone), t.episode_return, &r.outcome));
        }
        let batch: Vec<(&Trajectory<LocalObservation>, bool)> = trajs.iter().map(|&t| (t, false)).collect();
        updates.push(learner.update(&batch, config)?);
        for r in rollouts {
            replay.push(r.locals.into_iter().next().expect("one application").1);
        }
    }
    let optimizer_bytes = learner.optimizer_bytes();
    Ok(PretrainOutcome { policy: learner.policy, replay, curve, updates, optimizer_bytes })
}

#[derive(Debug, Clone)]
pub struct JointOutcome {
    pub global: GlobalPolicy,
    pub locals: Vec<LocalPolicy>,
    pub curve: Vec<EpisodeStats>,
    pub global_updates: Vec<UpdateStats>,
    pub optimizer_bytes: usize,
}

/// Phase 2: global episodes with sampled delegation. Each batch first
/// updates the global policy on the global rewards, then every local policy
/// on its fresh trajectories mixed with replayed pretraining trajectories.
pub fn joint_train(
    env: &Environment,
    global: GlobalPolicy,
    locals: Vec<LocalPolicy>,
    mut replays: Vec<ReplayBuffer<LocalObservation>>,
    config: &TrainConfig,
) -> Result<JointOutcome, TrainError> {
    check_config(config)?;
    let zones = env.zone_count();
    if locals.len() != zones || replays.len() != zones {
        return Err(TrainError::PolicyCount { expected: zones, got: locals.len().min(replays.len()) });
    }
    let mut global = Learner::new(global, config.learning_rate);
    let mut locals: Vec<Learner<LocalPolicy>> = locals.into_iter().map(|p| Learner::new(p, config.learning_rate)).collect();
    let n_replay = (config.replay_mix * config.batch_size as f64).round() as usize;
    let n_fresh = config.batch_size - n_replay.min(config.batch_size);
    let mut curve = Vec::with_capacity(config.joint_episodes);
    let mut global_updates = Vec::new();
    for range in batches(config.joint_episodes, config.batch_size) {
        let local_policies: Vec<LocalPolicy> = locals.iter().map(|l| l.policy.clone()).collect();
        let rollouts: Vec<Rollout> = range
            .clone()
            .into_par_iter()
            .map(|k| {
                let seed = derive(config.seed, &[stream::EPISODE, PHASE_JOINT, k as u64]);
                run_global_episode(env, &global.policy, &local_policies, Mode::Sample, seed)
            })
            .collect();
        for (k, r) in range.zip(&rollouts) {
            curve.push(EpisodeStats::from_outcome(k, None, r.outcome.global_reward, &r.outcome));
        }
        let gbatch: Vec<(&Trajectory<GlobalObservation>, bool)> = rollouts.iter().map(|r| (&r.global, false)).collect();
        global_updates.push(global.update(&gbatch, config)?);
        for (z, learner) in locals.iter_mut().enumerate() {
            let fresh: Vec<&Trajectory<LocalObservation>> =
                rollouts.iter().flat_map(|r| &r.locals).filter(|(zone, _)| *zone == z).map(|(_, t)| t).take(n_fresh).collect();
            let replayed = replays[z].sample(n_replay);
            let batch: Vec<(&Trajectory<LocalObservation>, bool)> =
                fresh.into_iter().map(|t| (t, false)).chain(replayed.iter().map(|t| (t, true))).collect();
            if !batch.is_empty() {
                learner.update(&batch, config)?;
            }
        }
    }
    let optimizer_bytes = global.optimizer_bytes() + locals.iter().map(Learner::optimizer_bytes).sum::<usize>();
    Ok(JointOutcome {
        global: global.policy,
        locals: locals.into_iter().map(|l| l.policy).collect(),
        curve,
        global_updates,
        optimizer_bytes,
    })
}

/// Result of both training phases.
#[derive(Debug, Clone)]
pub struct HierarchyOutcome {
    pub global: GlobalPolicy,
    pub locals: Vec<LocalPolicy>,
    /// One pretraining curve per zone.
    pub pretrain_curves: Vec<Vec<EpisodeStats>>,
    pub joint_curve: Vec<EpisodeStats>,
    /// Parameters, optimizer moments and replayed observations, in bytes.
    pub memory_bytes: usize,
}

/// Pretrains every zone's local policy, then trains all policies jointly.
/// Policies are initialized from `config.seed`.
pub fn train_hierarchy(env: &Environment, config: &TrainConfig) -> Result<HierarchyOutcome, TrainError> {
    check_config(config)?;
    let zones = env.zone_count();
    let mut locals = Vec::with_capacity(zones);
    let mut replays = Vec::with_capacity(zones);
    let mut pretrain_curves = Vec::with_capacity(zones);
    let mut pretrain_bytes = 0;
    for z in 0..zones {
        let pre = pretrain_local(env, init_local(z, config.seed), config)?;
        pretrain_bytes += pre.optimizer_bytes + replay_bytes(&pre.replay);
        locals.push(pre.policy);
        replays.push(pre.replay);
        pretrain_curves.push(pre.curve);
    }
    let replay_total: usize = replays.iter().map(replay_bytes).sum();
    let joint = joint_train(env, init_global(zones, config.seed), locals, replays, config)?;
    let params = 8 * (joint.global.param_count() + joint.locals.iter().map(|l| l.param_count()).sum::<usize>());
    Ok(HierarchyOutcome {
        memory_bytes: params + pretrain_bytes.max(joint.optimizer_bytes + replay_total),
        global: joint.global,
        locals: joint.locals,
        pretrain_curves,
        joint_curve: joint.curve,
    })
}

/// Bytes held by the observations stored in a replay buffer.
pub fn replay_bytes(replay: &ReplayBuffer<LocalObservation>) -> usize {
    replay.iter().flat_map(|t| &t.steps).map(|s| LocalPolicy::observation_bytes(&s.observation)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::EnvironmentConfig;
    use crate::model::fixtures::*;
    use crate::model::{ApplicationGraph, Partition, ResourceGraph};

    fn env_with(res: ResourceGraph, part: Vec<usize>, zones: usize) -> Environment {
        let part = Partition::from_assignment(part, zones).unwrap();
        Environment::new(res, part, vec![chain_app(3)], vec![0], EnvironmentConfig::default()).unwrap()
    }

    fn small_config(episodes: usize) -> TrainConfig {
        TrainConfig { pretrain_episodes: episodes, joint_episodes: episodes, batch_size: 2, seed: 5, ..TrainConfig::default() }
    }

    #[test]
    fn default_config_is_valid() {
        assert!(TrainConfig::default().problems().is_empty());
        let bad = TrainConfig { discount: 1.5, batch_size: 0, learning_rate: f64::NAN, ..TrainConfig::default() };
        assert_eq!(bad.problems().len(), 3);
    }

    #[test]
    fn zero_learning_rate_preserves_parameters() {
        let env = env_with(ring(6), vec![0, 0, 0, 1, 1, 1], 2);
        let config = TrainConfig { learning_rate: 0.0, ..small_config(6) };
        let locals: Vec<LocalPolicy> = (0..2).map(|z| init_local(z, 1)).collect();
        let pre = pretrain_local(&env, locals[0].clone(), &config).unwrap();
        assert_eq!(pre.policy, locals[0]);
        let global = init_global(2, 1);
        let replays = vec![pre.replay.clone(), pre.replay.clone()];
        let joint = joint_train(&env, global.clone(), locals.clone(), replays, &config).unwrap();
        assert_eq!(joint.global, global);
        assert_eq!(joint.locals, locals);
    }

    #[test]
    fn single_node_zone_has_flat_curve() {
        let res = ResourceGraph::new(vec![node(0, 10.0, 1.0, 1.0), node(1, 10.0, 1.0, 1.0)], vec![link(0, 1, 1.0, 10.0)]);
        let env = env_with(res, vec![0, 1], 2);
        let pre = pretrain_local(&env, init_local(1, 0), &small_config(8)).unwrap();
        let first = pre.curve[0].reward;
        assert!(pre.curve.iter().all(|s| s.reward == first));
        assert_eq!(pre.replay.len(), 8);
    }

    #[test]
    fn pretraining_is_deterministic() {
        let env = env_with(ring(6), vec![0, 0, 0, 1, 1, 1], 2);
        let a = pretrain_local(&env, init_local(0, 3), &small_config(6)).unwrap();
        let b = pretrain_local(&env, init_local(0, 3), &small_config(6)).unwrap();
        assert_eq!(a.policy, b.policy);
        assert_eq!(a.curve, b.curve);
        assert_ne!(a.policy, init_local(0, 3));
    }

    #[test]
    fn replay_only_mix_still_moves_locals() {
        let env = env_with(ring(6), vec![0, 0, 0, 1, 1, 1], 2);
        let config = TrainConfig { replay_mix: 1.0, ..small_config(4) };
        let pre: Vec<PretrainOutcome> = (0..2).map(|z| pretrain_local(&env, init_local(z, 2), &config).unwrap()).collect();
        let locals: Vec<LocalPolicy> = pre.iter().map(|p| p.policy.clone()).collect();
        let replays = pre.iter().map(|p| p.replay.clone()).collect();
        let joint = joint_train(&env, init_global(2, 2), locals.clone(), replays, &config).unwrap();
        assert_ne!(joint.locals[0], locals[0]);
        assert_ne!(joint.locals[1], locals[1]);
        assert_ne!(joint.global, init_global(2, 2));
    }

    #[test]
    fn divergence_is_reported() {
        let env = env_with(ring(6), vec![0, 0, 0, 1, 1, 1], 2);
        let config = TrainConfig { learning_rate: 1e308, grad_clip: 0.0, ..small_config(8) };
        let err = pretrain_local(&env, init_local(0, 0), &config).unwrap_err();
        assert!(matches!(err, TrainError::Diverged { .. }), "{err}");
    }

    #[test]
    fn infeasible_first_component_gives_one_step_penalty() {
        let big = ApplicationGraph::new(vec![comp(0, 100.0, 1.0, 10.0), comp(1, 1.0, 1.0, 10.0)], vec![edge(0, 1, 100.0, 1.0, 1.0)]);
        let part = Partition::from_assignment(vec![0, 0, 0, 1, 1, 1], 2).unwrap();
        let env = Environment::new(ring(6), part, vec![big], vec![0], EnvironmentConfig::default()).unwrap();
        let r = run_local_episode(&env, 0, 0, &init_local(0, 0), Mode::Sample, 1);
        let t = &r.locals[0].1;
        assert_eq!(t.len(), 1);
        assert!(t.steps[0].decision.is_none());
        assert_eq!(t.steps[0].reward, -1.0);
        assert!(t.steps[0].terminal);
    }
}
