use std::collections::VecDeque;

use rand::Rng as _;

use super::sampling::Decision;
use crate::rng::{seeded, Rng};

/// One decision point. `decision` is `None` when every action was masked and
/// the episode ended there.
#[derive(Debug, Clone)]
pub struct Step<O> {
    pub observation: O,
    pub decision: Option<Decision>,
    pub reward: f64,
    pub terminal: bool,
}

#[derive(Debug, Clone)]
pub struct Trajectory<O> {
    pub steps: Vec<Step<O>>,
    pub episode_return: f64,
}

impl<O> Default for Trajectory<O> {
    fn default() -> Self {
        Self { steps: Vec::new(), episode_return: 0.0 }
    }
}

impl<O> Trajectory<O> {
    pub fn push(&mut self, observation: O, decision: Option<Decision>) {
        self.steps.push(Step { observation, decision, reward: 0.0, terminal: false });
    }

    /// Puts `reward` on the last step and marks it terminal.
    pub fn terminate(&mut self, reward: f64) {
        if let Some(last) = self.steps.last_mut() {
            last.reward = reward;
            last.terminal = true;
        }
        self.episode_return = self.steps.iter().map(|s| s.reward).sum();
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Discounted return from every step: `G_t = sum_k discount^(k-t) r_k`.
    pub fn returns(&self, discount: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.steps.len()];
        let mut acc = 0.0;
        for (t, s) in self.steps.iter().enumerate().rev() {
            acc = s.reward + discount * acc;
            out[t] = acc;
        }
        out
    }
}

/// Bounded FIFO of trajectories with seeded uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<O> {
    capacity: usize,
    items: VecDeque<Trajectory<O>>,
    rng: Rng,
}

impl<O: Clone> ReplayBuffer<O> {
    pub fn new(capacity: usize, seed: u64) -> Self {
        Self { capacity, items: VecDeque::with_capacity(capacity.min(4096)), rng: seeded(seed) }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Appends, evicting the oldest entry when full.
    pub fn push(&mut self, t: Trajectory<O>) {
        if self.capacity == 0 {
            return;
        }
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Trajectory<O>> {
        self.items.iter()
    }

    /// `k` trajectories drawn uniformly with replacement.
    pub fn sample(&mut self, k: usize) -> Vec<Trajectory<O>> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..k).map(|_| self.items[self.rng.random_range(0..self.items.len())].clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(tag: usize, len: usize, reward: f64) -> Trajectory<usize> {
        let mut t = Trajectory::default();
        for _ in 0..len {
            t.push(tag, Some(Decision { action: 0, log_prob: 0.0 }));
        }
        t.terminate(reward);
        t
    }

    #[test]
    fn terminal_reward_and_returns() {
        let t = traj(0, 3, 2.0);
        assert_eq!(t.steps.iter().map(|s| s.reward).collect::<Vec<_>>(), vec![0.0, 0.0, 2.0]);
        assert!(t.steps[2].terminal && !t.steps[1].terminal);
        assert_eq!(t.returns(1.0), vec![2.0, 2.0, 2.0]);
        assert_eq!(t.returns(0.5), vec![0.5, 1.0, 2.0]);
        assert_eq!(t.episode_return, 2.0);
    }

    #[test]
    fn fifo_eviction_respects_capacity() {
        let mut buf = ReplayBuffer::new(3, 0);
        for i in 0..5 {
            buf.push(traj(i, 1, 0.0));
            assert!(buf.len() <= 3);
        }
        assert_eq!(buf.iter().map(|t| t.steps[0].observation).collect::<Vec<_>>(), vec![2, 3, 4]);
    }

    #[test]
    fn sampling_is_seeded_and_uniform() {
        let mut a = ReplayBuffer::new(4, 9);
        let mut b = ReplayBuffer::new(4, 9);
        for i in 0..4 {
            a.push(traj(i, 1, 0.0));
            b.push(traj(i, 1, 0.0));
        }
        let tags = |v: Vec<Trajectory<usize>>| v.iter().map(|t| t.steps[0].observation).collect::<Vec<_>>();
        let sa = tags(a.sample(8000));
        assert_eq!(sa, tags(b.sample(8000)));
        for i in 0..4 {
            let c = sa.iter().filter(|&&x| x == i).count() as f64;
            assert!((c - 2000.0).abs() < 150.0, "{i}: {c}");
        }
    }
}
