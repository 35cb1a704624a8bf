use std::collections::VecDeque;

use rand::Rng;

use crate::error::{Error, Result};
use crate::pipeline::Observation;
use crate::world::Action;

/// One transition `(o, a, r, o')`. No episode or time index is kept.
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub observation: Observation,
    pub action: Action,
    pub reward: f64,
    pub next_observation: Observation,
    pub terminal: bool,
}

/// FIFO replay memory.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    capacity: usize,
    items: VecDeque<Experience>,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidConfig("replay capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
        })
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

    pub fn push(&mut self, exp: Experience) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(exp);
    }

    pub fn latest(&self) -> Option<&Experience> {
        self.items.back()
    }

    pub fn get(&self, i: usize) -> Option<&Experience> {
        self.items.get(i)
    }

    /// Combined experience replay: `batch_size - 1` uniform draws with
    /// replacement, plus the newest transition as the last element.
    pub fn sample_combined<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<&Experience>> {
        Ok(self
            .sample_indices(batch_size, rng)?
            .into_iter()
            .map(|i| &self.items[i])
            .collect())
    }

    pub fn sample_indices<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<usize>> {
        if batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        if self.items.is_empty() {
            return Err(Error::InvalidConfig("sampling from an empty replay memory".into()));
        }
        let n = self.items.len();
        let mut idx: Vec<usize> = (0..batch_size - 1).map(|_| rng.random_range(0..n)).collect();
        idx.push(n - 1);
        Ok(idx)
    }
}
