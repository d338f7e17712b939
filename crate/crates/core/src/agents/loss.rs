//! Policy-gradient surrogate loss, its analytic gradient, and a
//! finite-difference check of that gradient.

use serde::{Deserialize, Serialize};

use super::policy::Policy;
use super::sampling::masked_log_softmax;

/// One decision to reinforce.
#[derive(Debug, Clone)]
pub struct Sample<O> {
    pub obs: O,
    pub action: usize,
    pub advantage: f64,
    /// Importance weight, held constant under differentiation.
    pub weight: f64,
    /// Log-probability under the policy that generated the action.
    pub old_log_prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub entropy_coef: f64,
    /// Clipped-ratio surrogate when set.
    pub ppo_clip: Option<f64>,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { entropy_coef: 0.0, ppo_clip: None }
    }
}

/// Loss of one sample and its gradient w.r.t. the scores.
///
/// Plain form: `-w A log p(a) - c H(p)`. Clipped form replaces the first term
/// by `-w min(r A, clip(r, 1-e, 1+e) A)` with `r = p(a) / p_old(a)`.
fn sample_loss(scores: &[f64], mask: &[bool], s_action: usize, advantage: f64, weight: f64, old: f64, cfg: &LossConfig) -> (f64, Vec<f64>) {
    let logp = masked_log_softmax(scores, mask);
    let p: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
    let indicator = |j: usize| if j == s_action { 1.0 } else { 0.0 };
    let (mut loss, coef) = match cfg.ppo_clip {
        None => (-weight * advantage * logp[s_action], -weight * advantage),
        Some(eps) => {
            let ratio = (logp[s_action] - old).exp();
            let unclipped = ratio * advantage;
            let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * advantage;
            if unclipped <= clipped {
                (-weight * unclipped, -weight * advantage * ratio)
            } else {
                (-weight * clipped, 0.0)
            }
        }
    };
    let mut grad: Vec<f64> = (0..scores.len()).map(|j| if mask[j] { coef * (indicator(j) - p[j]) } else { 0.0 }).collect();
    if cfg.entropy_coef != 0.0 {
        let entropy: f64 = -(0..scores.len()).filter(|&j| mask[j]).map(|j| p[j] * logp[j]).sum::<f64>();
        loss -= cfg.entropy_coef * entropy;
        for j in (0..scores.len()).filter(|&j| mask[j]) {
            grad[j] += cfg.entropy_coef * p[j] * (logp[j] + entropy);
        }
    }
    (loss, grad)
}

/// Summed surrogate loss over `samples`.
pub fn surrogate_loss<P: Policy>(policy: &P, samples: &[Sample<P::Obs>], cfg: &LossConfig) -> f64 {
    samples
        .iter()
        .map(|s| {
            let scores = policy.scores(&s.obs);
            sample_loss(&scores, P::action_mask(&s.obs), s.action, s.advantage, s.weight, s.old_log_prob, cfg).0
        })
        .sum()
}

/// Summed surrogate loss and its parameter gradient. Per-sample terms are
/// reduced by pairwise summation, so a batch made of two identical halves
/// yields exactly twice the loss and gradient of one half.
pub fn surrogate_grad<P: Policy>(policy: &P, samples: &[Sample<P::Obs>], cfg: &LossConfig) -> (f64, P) {
    let terms: Vec<(f64, P)> = samples
        .iter()
        .map(|s| {
            let (scores, cache) = policy.forward(&s.obs);
            let mask = P::action_mask(&s.obs);
            let (l, d_scores) = sample_loss(&scores, mask, s.action, s.advantage, s.weight, s.old_log_prob, cfg);
            let mut g = policy.zeros_like();
            policy.backward(&s.obs, &cache, &d_scores, &mut g);
            (l, g)
        })
        .collect();
    match pairwise_sum(&terms) {
        Some(t) => t,
        None => (0.0, policy.zeros_like()),
    }
}

fn pairwise_sum<P: Policy>(terms: &[(f64, P)]) -> Option<(f64, P)> {
    match terms.len() {
        0 => None,
        1 => Some(terms[0].clone()),
        n => {
            let (left, right) = terms.split_at(n / 2);
            let (la, mut ga) = pairwise_sum(left)?;
            let (lb, gb) = pairwise_sum(right)?;
            ga.add_scaled(&gb, 1.0);
            Some((la + lb, ga))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// Parameter index with the largest error.
    pub worst: usize,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
}

/// `|a - n| / max(|a| + |n|, 1e-6)`.
pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / (a.abs() + n.abs()).max(1e-6)
}

/// Compares the analytic gradient of the summed surrogate loss with central
/// finite differences of step `h` on every parameter.
pub fn gradient_check<P: Policy>(policy: &P, samples: &[Sample<P::Obs>], cfg: &LossConfig, h: f64) -> GradCheck {
    let analytic = surrogate_grad(policy, samples, cfg).1.flatten();
    let base = policy.flatten();
    let mut probe = policy.clone();
    let mut flat = base.clone();
    let mut numeric = Vec::with_capacity(base.len());
    for k in 0..base.len() {
        flat[k] = base[k] + h;
        probe.set_flat(&flat);
        let up = surrogate_loss(&probe, samples, cfg);
        flat[k] = base[k] - h;
        probe.set_flat(&flat);
        let down = surrogate_loss(&probe, samples, cfg);
        flat[k] = base[k];
        numeric.push((up - down) / (2.0 * h));
    }
    let (worst, max_rel_error) = analytic
        .iter()
        .zip(&numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .enumerate()
        .fold((0, 0.0), |best, (i, e)| if e > best.1 { (i, e) } else { best });
    GradCheck { max_rel_error, worst, analytic, numeric }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::policy::{local_observe, GlobalPolicy, LocalObservation, LocalPolicy};
    use crate::embedding::Parameters;
    use crate::harness::{Environment, EnvironmentConfig};
    use crate::model::fixtures::*;
    use crate::model::Partition;
    use crate::placement::PlacementState;
    use crate::rng::seeded;

    fn env() -> Environment {
        let part = Partition::from_assignment(vec![0, 0, 0, 1, 1, 1], 2).unwrap();
        Environment::new(ring(6), part, vec![chain_app(3)], vec![0], EnvironmentConfig::default()).unwrap()
    }

    fn samples(e: &Environment) -> Vec<Sample<LocalObservation>> {
        let app = e.app(0);
        let s0 = PlacementState::new(app, &e.resources);
        let s1 = s0.apply(app, &e.resources, 0, 1).unwrap();
        vec![
            Sample {
                obs: local_observe(e, 0, 0, &s0, 0, vec![true, true, true]),
                action: 2,
                advantage: 0.7,
                weight: 1.0,
                old_log_prob: -1.0,
            },
            Sample {
                obs: local_observe(e, 0, 0, &s1, 1, vec![true, false, true]),
                action: 0,
                advantage: -0.4,
                weight: 2.5,
                old_log_prob: -0.9,
            },
        ]
    }

    #[test]
    fn score_gradient_matches_finite_differences() {
        let scores = [0.3, -1.1, 0.8, 2.0];
        let mask = [true, true, false, true];
        for cfg in [LossConfig { entropy_coef: 0.3, ppo_clip: None }, LossConfig { entropy_coef: 0.0, ppo_clip: Some(0.2) }] {
            let (_, g) = sample_loss(&scores, &mask, 1, 1.3, 0.8, -1.6, &cfg);
            assert_eq!(g[2], 0.0);
            for j in [0, 1, 3] {
                let mut up = scores;
                up[j] += 1e-6;
                let mut down = scores;
                down[j] -= 1e-6;
                let fd = (sample_loss(&up, &mask, 1, 1.3, 0.8, -1.6, &cfg).0 - sample_loss(&down, &mask, 1, 1.3, 0.8, -1.6, &cfg).0) / 2e-6;
                assert!((fd - g[j]).abs() < 1e-8, "{cfg:?} {j}: {fd} vs {}", g[j]);
            }
        }
    }

    #[test]
    fn local_policy_gradient_check() {
        let e = env();
        let p = LocalPolicy::new(0, &mut seeded(11));
        let cfg = LossConfig { entropy_coef: 0.05, ppo_clip: None };
        let check = gradient_check(&p, &samples(&e), &cfg, 1e-5);
        assert!(check.max_rel_error < 1e-3, "{}", check.max_rel_error);
    }

    #[test]
    fn global_policy_gradient_check() {
        let e = env();
        let p = GlobalPolicy::new(2, &mut seeded(12));
        let s0 = PlacementState::new(e.app(0), &e.resources);
        let batch = vec![Sample {
            obs: crate::agents::policy::global_observe(&e, 0, &s0),
            action: 1,
            advantage: 1.5,
            weight: 1.0,
            old_log_prob: 0.0,
        }];
        let check = gradient_check(&p, &batch, &LossConfig { entropy_coef: 0.1, ppo_clip: None }, 1e-5);
        assert!(check.max_rel_error < 1e-3, "{}", check.max_rel_error);
    }

    #[test]
    fn untouched_parameters_have_zero_gradient() {
        // With the only sample's mask allowing a single action, the gradient
        // of the policy term vanishes everywhere.
        let e = env();
        let p = LocalPolicy::new(0, &mut seeded(13));
        let s0 = PlacementState::new(e.app(0), &e.resources);
        let batch = vec![Sample {
            obs: local_observe(&e, 0, 0, &s0, 0, vec![false, true, false]),
            action: 1,
            advantage: 2.0,
            weight: 1.0,
            old_log_prob: 0.0,
        }];
        let check = gradient_check(&p, &batch, &LossConfig::default(), 1e-5);
        assert!(check.analytic.iter().all(|&g| g == 0.0));
        assert!(check.numeric.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn duplicated_batch_doubles_gradient_exactly() {
        let e = env();
        let p = LocalPolicy::new(0, &mut seeded(14));
        let cfg = LossConfig { entropy_coef: 0.02, ppo_clip: None };
        let single = samples(&e);
        let doubled: Vec<_> = single.iter().chain(&single).cloned().collect();
        let (l1, g1) = surrogate_grad(&p, &single, &cfg);
        let (l2, g2) = surrogate_grad(&p, &doubled, &cfg);
        assert_eq!(l2, 2.0 * l1);
        let (a, b) = (g1.flatten(), g2.flatten());
        assert!(a.iter().zip(&b).all(|(x, y)| *y == 2.0 * x));
    }
}
