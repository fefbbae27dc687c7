use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;

use crate::econ::{FOLLOWER_OBS_DIM, HOUSEHOLD_ACTION_DIM};
use crate::error::{contract, Result};

/// One joint step. Follower rows are stored flat, row-major by household;
/// actions are in unit coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub leader_obs: Vec<f64>,
    pub leader_action: Vec<f64>,
    pub leader_reward: f64,
    pub next_leader_obs: Vec<f64>,
    pub follower_obs: Vec<f64>,
    pub follower_actions: Vec<f64>,
    pub follower_rewards: Vec<f64>,
    pub next_follower_obs: Vec<f64>,
    pub done: bool,
}

impl Transition {
    pub fn n(&self) -> usize {
        self.follower_rewards.len()
    }

    pub fn obs(&self, i: usize) -> &[f64] {
        &self.follower_obs[i * FOLLOWER_OBS_DIM..(i + 1) * FOLLOWER_OBS_DIM]
    }

    pub fn action(&self, i: usize) -> &[f64] {
        &self.follower_actions[i * HOUSEHOLD_ACTION_DIM..(i + 1) * HOUSEHOLD_ACTION_DIM]
    }

    pub fn next_obs(&self, i: usize) -> &[f64] {
        &self.next_follower_obs[i * FOLLOWER_OBS_DIM..(i + 1) * FOLLOWER_OBS_DIM]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0
            || self.follower_obs.len() != n * FOLLOWER_OBS_DIM
            || self.next_follower_obs.len() != n * FOLLOWER_OBS_DIM
            || self.follower_actions.len() != n * HOUSEHOLD_ACTION_DIM
        {
            return Err(contract("transition follower arrays disagree on the population size"));
        }
        Ok(())
    }
}

/// Bounded FIFO; the oldest item is evicted when full.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { items: VecDeque::with_capacity(capacity.min(1 << 16)), capacity: capacity.max(1) }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Uniform sample of `min(batch, len)` distinct items.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<&Transition> {
        let k = batch.min(self.items.len());
        index::sample(rng, self.items.len(), k).into_iter().map(|i| &self.items[i]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn dummy(tag: f64) -> Transition {
        Transition {
            leader_obs: vec![tag; 8],
            leader_action: vec![0.0; 5],
            leader_reward: tag,
            next_leader_obs: vec![tag; 8],
            follower_obs: vec![tag; 6],
            follower_actions: vec![0.0; 2],
            follower_rewards: vec![tag],
            next_follower_obs: vec![tag; 6],
            done: false,
        }
    }

    #[test]
    fn fifo_keeps_most_recent() {
        let mut b = ReplayBuffer::new(3);
        for k in 0..5 {
            b.push(dummy(k as f64));
        }
        assert_eq!(b.len(), 3);
        let kept: Vec<f64> = b.iter().map(|t| t.leader_reward).collect();
        assert_eq!(kept, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn sample_is_without_replacement() {
        let mut b = ReplayBuffer::new(100);
        for k in 0..20 {
            b.push(dummy(k as f64));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = b.sample(20, &mut rng);
        let mut tags: Vec<i64> = s.iter().map(|t| t.leader_reward as i64).collect();
        tags.sort();
        assert_eq!(tags, (0..20).collect::<Vec<_>>());
        assert_eq!(b.sample(50, &mut rng).len(), 20);
        assert!(dummy(0.0).validate().is_ok());
    }
}
