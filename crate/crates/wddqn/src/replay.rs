//! Prioritized experience replay on a sum-tree, extended with the scheduled
//! replay strategy (SRS): transitions of a freshly finished trajectory enter
//! the memory with priorities that rise toward the terminal sample,
//! `p_i = p_max * w_i` with `w_i = exp(rho_c * u^i)` clamped at `w_max`.

use std::io::{self, Write};

use rand::Rng;
use thiserror::Error;

/// One experience tuple. Besides the encoded states it carries the discrete
/// state identifiers used for temperature and reward-statistics lookups.
#[derive(Debug, Clone)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    /// Raw environment reward.
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
    pub state_key: u64,
    pub next_state_key: u64,
}

/// Ordered transitions of the episode in progress.
#[derive(Debug, Default)]
pub struct EpisodicMemory {
    items: Vec<Transition>,
}

impl EpisodicMemory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: Transition) {
        debug_assert!(
            self.items.last().map_or(true, |prev| {
                !prev.terminal && prev.next_state_key == t.state_key
            }),
            "episodic memory must chain transitions"
        );
        self.items.push(t);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Transition> {
        self.items.iter()
    }

    pub fn clear(&mut self) {
        self.items.clear();
    }

    pub fn drain(&mut self) -> std::vec::Drain<'_, Transition> {
        self.items.drain(..)
    }
}

/// Parameters of the rising priority schedule.
#[derive(Debug, Clone, Copy)]
pub struct PrioritySchedule {
    /// Exponent coefficient.
    pub rho_c: f64,
    /// Rising rate, > 1.
    pub u: f64,
    /// Weight clamp; keeps `exp(rho_c * u^i)` finite for long episodes.
    pub w_max: f64,
}

impl Default for PrioritySchedule {
    fn default() -> Self {
        Self {
            rho_c: 0.2,
            u: 1.1,
            w_max: 10.0,
        }
    }
}

/// `w_i = exp(min(rho_c * u^i, ln w_max))` for `i = 0..n-1`; nondecreasing.
pub fn schedule_weights(n: usize, sched: &PrioritySchedule) -> Vec<f64> {
    let log_cap = sched.w_max.ln();
    (0..n)
        .map(|i| {
            let exponent = sched.rho_c * sched.u.powi(i as i32);
            exponent.min(log_cap).exp()
        })
        .collect()
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReplayError {
    #[error("memory holds {have} transitions, need {need}")]
    NotEnoughSamples { have: usize, need: usize },
    #[error("leaf was evicted; priority update rejected")]
    StaleLeaf,
}

/// Handle to a sampled leaf; invalidated when the slot is overwritten.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LeafRef {
    slot: usize,
    generation: u64,
}

/// One sampled entry: the leaf handle and its selection probability.
#[derive(Debug, Clone, Copy)]
pub struct SampleRef {
    pub leaf: LeafRef,
    pub prob: f64,
}

const PRIORITY_FLOOR: f64 = 1e-3;
const REBUILD_INTERVAL: u64 = 10_000;

/// Capacity-bounded prioritized replay store. Internal nodes hold children
/// sums (for proportional sampling) and children maxima (for the running
/// maximum priority used by trajectory insertion). Storage is a circular
/// buffer with FIFO eviction.
#[derive(Debug)]
pub struct SumTreeMemory {
    capacity: usize,
    /// Number of leaves, rounded up to a power of two.
    leaf_base: usize,
    sums: Vec<f64>,
    maxes: Vec<f64>,
    items: Vec<Option<Transition>>,
    generations: Vec<u64>,
    next_slot: usize,
    size: usize,
    mutations: u64,
}

impl SumTreeMemory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "capacity must be at least 1");
        let leaf_base = capacity.next_power_of_two();
        Self {
            capacity,
            leaf_base,
            sums: vec![0.0; 2 * leaf_base],
            maxes: vec![0.0; 2 * leaf_base],
            items: (0..capacity).map(|_| None).collect(),
            generations: vec![0; capacity],
            next_slot: 0,
            size: 0,
            mutations: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn total_priority(&self) -> f64 {
        self.sums[1]
    }

    /// Maximum priority over stored transitions; 1 when empty.
    pub fn max_priority(&self) -> f64 {
        if self.size == 0 {
            1.0
        } else {
            self.maxes[1]
        }
    }

    pub fn priority_of(&self, slot: usize) -> Option<f64> {
        if slot < self.capacity && self.items[slot].is_some() {
            Some(self.sums[self.leaf_base + slot])
        } else {
            None
        }
    }

    pub fn transition(&self, leaf: LeafRef) -> Option<&Transition> {
        if leaf.slot < self.capacity && self.generations[leaf.slot] == leaf.generation {
            self.items[leaf.slot].as_ref()
        } else {
            None
        }
    }

    fn set_leaf(&mut self, slot: usize, priority: f64) {
        let mut idx = self.leaf_base + slot;
        self.sums[idx] = priority;
        self.maxes[idx] = priority;
        while idx > 1 {
            idx /= 2;
            self.sums[idx] = self.sums[2 * idx] + self.sums[2 * idx + 1];
            self.maxes[idx] = self.maxes[2 * idx].max(self.maxes[2 * idx + 1]);
        }
        self.mutations += 1;
        if self.mutations % REBUILD_INTERVAL == 0 {
            self.rebuild();
        }
    }

    /// Recompute internal sums exactly from the leaves, shedding the float
    /// drift of incremental updates.
    fn rebuild(&mut self) {
        for idx in (1..self.leaf_base).rev() {
            self.sums[idx] = self.sums[2 * idx] + self.sums[2 * idx + 1];
            self.maxes[idx] = self.maxes[2 * idx].max(self.maxes[2 * idx + 1]);
        }
    }

    /// Insert one transition with an explicit priority, evicting the oldest
    /// entry when full.
    pub fn push_with_priority(&mut self, t: Transition, priority: f64) {
        let slot = self.next_slot;
        self.items[slot] = Some(t);
        self.generations[slot] += 1;
        self.next_slot = (self.next_slot + 1) % self.capacity;
        if self.size < self.capacity {
            self.size += 1;
        }
        self.set_leaf(slot, priority.max(PRIORITY_FLOOR));
    }

    /// Insert a finished trajectory with schedule priorities
    /// `p_i = p_max * w_i`, where `p_max` is the maximum priority currently
    /// stored (1 for an empty memory).
    pub fn push_trajectory(&mut self, episode: &mut EpisodicMemory, sched: &PrioritySchedule) {
        if episode.is_empty() {
            return;
        }
        let base = self.max_priority();
        let weights = schedule_weights(episode.len(), sched);
        for (t, w) in episode.drain().zip(weights) {
            self.push_with_priority(t, base * w);
        }
    }

    /// Draw `batch_size` leaves with probability proportional to priority.
    /// Returns the leaf handles and their selection probabilities.
    pub fn sample<R: Rng>(
        &self,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<Vec<SampleRef>, ReplayError> {
        if self.size < batch_size {
            return Err(ReplayError::NotEnoughSamples {
                have: self.size,
                need: batch_size,
            });
        }
        let total = self.total_priority();
        let mut out = Vec::with_capacity(batch_size);
        for _ in 0..batch_size {
            let mut target = rng.gen::<f64>() * total;
            let mut idx = 1;
            while idx < self.leaf_base {
                let left = 2 * idx;
                if target <= self.sums[left] || self.sums[left + 1] == 0.0 {
                    idx = left;
                } else {
                    target -= self.sums[left];
                    idx = left + 1;
                }
            }
            let slot = (idx - self.leaf_base).min(self.size - 1);
            out.push(SampleRef {
                leaf: LeafRef {
                    slot,
                    generation: self.generations[slot],
                },
                prob: self.sums[self.leaf_base + slot] / total,
            });
        }
        Ok(out)
    }

    /// Re-prioritize a sampled leaf from its TD error:
    /// `priority = |td_error| + 1e-3`. Rejects handles whose slot has been
    /// evicted since sampling.
    pub fn update_priority(&mut self, leaf: LeafRef, td_error: f64) -> Result<(), ReplayError> {
        if leaf.slot >= self.capacity
            || self.generations[leaf.slot] != leaf.generation
            || self.items[leaf.slot].is_none()
        {
            return Err(ReplayError::StaleLeaf);
        }
        self.set_leaf(leaf.slot, td_error.abs() + PRIORITY_FLOOR);
        Ok(())
    }

    /// Exact sum of leaf priorities, for consistency checks.
    pub fn leaf_sum(&self) -> f64 {
        self.sums[self.leaf_base..self.leaf_base + self.capacity]
            .iter()
            .sum()
    }

    /// Debug dump of `(slot, priority)` pairs as CSV.
    pub fn dump_priorities<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "slot,priority")?;
        for slot in 0..self.capacity {
            if self.items[slot].is_some() {
                writeln!(w, "{},{}", slot, self.sums[self.leaf_base + slot])?;
            }
        }
        Ok(())
    }
}
