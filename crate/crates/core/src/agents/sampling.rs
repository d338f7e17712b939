//! Masked categorical action selection.

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Sample,
    Greedy,
}

/// A chosen action and its log-probability under the masked softmax.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub action: usize,
    pub log_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ActError {
    #[error("no feasible action: every action is masked")]
    NoFeasibleAction,
    #[error("{scores} scores but {mask} mask entries")]
    Length { scores: usize, mask: usize },
}

/// Log-softmax restricted to unmasked entries; masked entries are `-inf`.
/// Returns all `-inf` when nothing is unmasked.
pub fn masked_log_softmax(scores: &[f64], mask: &[bool]) -> Vec<f64> {
    let max = scores.iter().zip(mask).filter(|(_, &m)| m).map(|(&s, _)| s).fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return vec![f64::NEG_INFINITY; scores.len()];
    }
    let sum: f64 = scores.iter().zip(mask).filter(|(_, &m)| m).map(|(&s, _)| (s - max).exp()).sum();
    let log_z = max + sum.ln();
    scores.iter().zip(mask).map(|(&s, &m)| if m { s - log_z } else { f64::NEG_INFINITY }).collect()
}

/// Probabilities of the masked softmax; masked entries are exactly 0.
pub fn masked_softmax(scores: &[f64], mask: &[bool]) -> Vec<f64> {
    masked_log_softmax(scores, mask).into_iter().map(f64::exp).collect()
}

/// Selects an action. A single unmasked action is returned with log-prob 0
/// and consumes no randomness; otherwise sample mode draws one uniform.
pub fn act(scores: &[f64], mask: &[bool], mode: Mode, rng: &mut Rng) -> Result<Decision, ActError> {
    if scores.len() != mask.len() {
        return Err(ActError::Length { scores: scores.len(), mask: mask.len() });
    }
    let allowed: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    match allowed.as_slice() {
        [] => return Err(ActError::NoFeasibleAction),
        [only] => return Ok(Decision { action: *only, log_prob: 0.0 }),
        _ => {}
    }
    let logp = masked_log_softmax(scores, mask);
    let action = match mode {
        Mode::Greedy => {
            let mut best = allowed[0];
            for &i in &allowed[1..] {
                if scores[i] > scores[best] {
                    best = i;
                }
            }
            best
        }
        Mode::Sample => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = *allowed.last().expect("non-empty");
            for &i in &allowed {
                acc += logp[i].exp();
                if u < acc {
                    pick = i;
                    break;
                }
            }
            pick
        }
    };
    Ok(Decision { action, log_prob: logp[action] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;

    #[test]
    fn forced_choice_uses_no_randomness() {
        let mut rng = seeded(1);
        let before = rng.clone();
        let d = act(&[5.0, -3.0, 2.0], &[false, true, false], Mode::Sample, &mut rng).unwrap();
        assert_eq!(d, Decision { action: 1, log_prob: 0.0 });
        assert_eq!(rng, before);
    }

    #[test]
    fn all_masked_is_an_explicit_outcome() {
        let err = act(&[1.0, 2.0], &[false, false], Mode::Sample, &mut seeded(0)).unwrap_err();
        assert_eq!(err, ActError::NoFeasibleAction);
        assert!(act(&[1.0], &[true, true], Mode::Greedy, &mut seeded(0)).is_err());
    }

    #[test]
    fn greedy_breaks_ties_toward_lowest_index() {
        let d = act(&[1.0, 3.0, 3.0, 9.0], &[true, true, true, false], Mode::Greedy, &mut seeded(0)).unwrap();
        assert_eq!(d.action, 1);
        assert!((d.log_prob - (3.0f64.exp() / (1.0f64.exp() + 2.0 * 3.0f64.exp())).ln()).abs() < 1e-12);
    }

    #[test]
    fn uniform_scores_sample_uniformly() {
        // Chi-square goodness of fit, 3 degrees of freedom, 99.9% critical value 16.27.
        let mut rng = seeded(2024);
        let mask = [true, true, false, true, true];
        let mut counts = [0usize; 5];
        let draws = 10_000;
        for _ in 0..draws {
            counts[act(&[0.5; 5], &mask, Mode::Sample, &mut rng).unwrap().action] += 1;
        }
        assert_eq!(counts[2], 0);
        let expected = draws as f64 / 4.0;
        let chi2: f64 = [0, 1, 3, 4].iter().map(|&i| (counts[i] as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 16.27, "chi2 = {chi2}, counts {counts:?}");
    }

    proptest! {
        #[test]
        fn masked_probability_is_exactly_zero(
            scores in prop::collection::vec(-50.0f64..50.0, 1..12),
            bits in prop::collection::vec(any::<bool>(), 12),
            seed in any::<u64>(),
        ) {
            let mask = &bits[..scores.len()];
            let p = masked_softmax(&scores, mask);
            for (pi, &m) in p.iter().zip(mask) {
                if !m {
                    prop_assert_eq!(*pi, 0.0);
                }
            }
            if mask.iter().any(|&m| m) {
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                let d = act(&scores, mask, Mode::Sample, &mut seeded(seed)).unwrap();
                prop_assert!(mask[d.action]);
                prop_assert!(d.log_prob.is_finite() && d.log_prob <= 0.0);
            }
        }
    }
}
