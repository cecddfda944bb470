use std::collections::VecDeque;

use rand::seq::index::sample;
use rand::Rng;

use super::env::NUM_ACTIONS;

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    /// States are stored at single precision to halve buffer memory.
    pub state: Vec<f32>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f32>,
    /// Actions available in `next_state`.
    pub next_valid: [bool; NUM_ACTIONS],
    pub done: bool,
}

/// Bounded FIFO experience memory.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    entries: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            entries: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Appends, evicting the oldest entry when full.
    pub fn push(&mut self, t: Transition) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(t);
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.entries[i]
    }

    /// Uniform sample of `n` distinct entries, or all of them when fewer.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<&Transition> {
        let n = n.min(self.entries.len());
        sample(rng, self.entries.len(), n)
            .into_iter()
            .map(|i| &self.entries[i])
            .collect()
    }
}
