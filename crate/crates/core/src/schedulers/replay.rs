use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::numerics::{RngStream, Vector};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayTuple {
    pub o_prev: Vector,
    /// Output index of the action in the owning network.
    pub action: usize,
    pub reward: f64,
    pub o_next: Vector,
}

/// What to drop when the buffer is full.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Eviction {
    /// The tuple at 1-based position `B` (the minibatch size).
    #[default]
    Paper,
    /// The oldest tuple.
    Fifo,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    batch: usize,
    eviction: Eviction,
    items: Vec<ReplayTuple>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, batch: usize, eviction: Eviction) -> Result<Self> {
        if batch == 0 || batch > capacity {
            return Err(Error::InvalidConfig(format!(
                "minibatch size {batch} must lie in 1..={capacity}"
            )));
        }
        Ok(Self {
            capacity,
            batch,
            eviction,
            items: Vec::with_capacity(capacity),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn batch_size(&self) -> usize {
        self.batch
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[ReplayTuple] {
        &self.items
    }

    /// Evicts per policy when full, then appends.
    pub fn push(&mut self, t: ReplayTuple) {
        if self.items.len() == self.capacity {
            match self.eviction {
                Eviction::Paper => self.items.remove(self.batch - 1),
                Eviction::Fifo => self.items.remove(0),
            };
        }
        self.items.push(t);
    }

    pub fn ready(&self) -> bool {
        self.items.len() >= self.batch
    }

    /// `B` distinct tuples drawn uniformly.
    pub fn sample(&self, rng: &mut RngStream) -> Vec<&ReplayTuple> {
        index::sample(rng, self.items.len(), self.batch)
            .into_iter()
            .map(|i| &self.items[i])
            .collect()
    }

    pub fn sample_indices(&self, rng: &mut RngStream) -> Vec<usize> {
        index::sample(rng, self.items.len(), self.batch).into_vec()
    }
}
