//! Fixed-capacity replay memory with uniform or proportional prioritized
//! sampling.

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReplayError {
    #[error("all priorities are zero")]
    AllZero,
    #[error("invalid priority {0}")]
    InvalidPriority(f64),
    #[error("replay buffer is empty")]
    Empty,
}

/// `p_i = priority_i^alpha / Σ priority_j^alpha`.
pub fn replay_sample_probabilities(priorities: &[f64], alpha: f64) -> Result<Vec<f64>, ReplayError> {
    if let Some(bad) = priorities.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
        return Err(ReplayError::InvalidPriority(*bad));
    }
    if priorities.iter().all(|p| *p == 0.0) {
        return Err(ReplayError::AllZero);
    }
    let scaled: Vec<f64> = priorities
        .iter()
        .map(|p| if *p == 0.0 && alpha > 0.0 { 0.0 } else { p.powf(alpha) })
        .collect();
    let total: f64 = scaled.iter().sum();
    Ok(scaled.into_iter().map(|s| s / total).collect())
}

/// `(n p_i)^(-beta)` for each sampled probability, divided by the batch maximum.
pub fn importance_weights(probabilities: &[f64], n: usize, beta: f64) -> Vec<f64> {
    let raw: Vec<f64> = probabilities.iter().map(|p| (n as f64 * p).powf(-beta)).collect();
    let max = raw.iter().copied().fold(f64::MIN, f64::max);
    raw.into_iter().map(|w| w / max).collect()
}

/// Binary sum tree over leaf priorities.
#[derive(Debug, Clone)]
pub struct SumTree {
    capacity: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(capacity: usize) -> Self {
        let capacity = capacity.max(1).next_power_of_two();
        Self {
            capacity,
            nodes: vec![0.0; 2 * capacity],
        }
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn get(&self, leaf: usize) -> f64 {
        self.nodes[self.capacity + leaf]
    }

    pub fn set(&mut self, leaf: usize, value: f64) {
        let mut i = self.capacity + leaf;
        self.nodes[i] = value;
        while i > 1 {
            i /= 2;
            self.nodes[i] = self.nodes[2 * i] + self.nodes[2 * i + 1];
        }
    }

    /// Leaf whose cumulative interval contains `mass` (clamped to a nonzero leaf).
    pub fn find(&self, mut mass: f64) -> usize {
        let mut i = 1;
        while i < self.capacity {
            let left = self.nodes[2 * i];
            if mass < left || self.nodes[2 * i + 1] == 0.0 {
                i *= 2;
            } else {
                mass -= left;
                i = 2 * i + 1;
            }
        }
        i - self.capacity
    }
}

#[derive(Debug, Clone)]
pub struct Sample<'a, T> {
    pub index: usize,
    pub item: &'a T,
    pub probability: f64,
}

/// Ring buffer; the oldest entry is evicted first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    items: Vec<T>,
    capacity: usize,
    next: usize,
    prioritized: Option<Prioritized>,
}

#[derive(Debug, Clone)]
struct Prioritized {
    tree: SumTree,
    alpha: f64,
    max_priority: f64,
}

impl<T> ReplayBuffer<T> {
    pub fn uniform(capacity: usize) -> Self {
        Self {
            items: Vec::with_capacity(capacity.min(1 << 16)),
            capacity: capacity.max(1),
            next: 0,
            prioritized: None,
        }
    }

    pub fn prioritized(capacity: usize, alpha: f64) -> Self {
        let mut b = Self::uniform(capacity);
        b.prioritized = Some(Prioritized {
            tree: SumTree::new(b.capacity),
            alpha,
            max_priority: 1.0,
        });
        b
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

    pub fn is_prioritized(&self) -> bool {
        self.prioritized.is_some()
    }

    pub fn get(&self, index: usize) -> Option<&T> {
        self.items.get(index)
    }

    /// Items from oldest to newest.
    pub fn iter_fifo(&self) -> impl Iterator<Item = &T> {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(self.items[..split].iter())
    }

    /// Inserts at the current maximum priority.
    pub fn push(&mut self, item: T) {
        let slot = self.next;
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[slot] = item;
        }
        self.next = (self.next + 1) % self.capacity;
        if let Some(p) = &mut self.prioritized {
            p.tree.set(slot, p.max_priority.powf(p.alpha));
        }
    }

    /// Current sampling probability of a slot.
    pub fn probability(&self, index: usize) -> f64 {
        match &self.prioritized {
            Some(p) => p.tree.get(index) / p.tree.total(),
            None => 1.0 / self.items.len() as f64,
        }
    }

    /// Stratified proportional sampling when prioritized, uniform otherwise.
    pub fn sample<R: Rng>(&self, rng: &mut R, batch: usize) -> Result<Vec<Sample<'_, T>>, ReplayError> {
        if self.items.is_empty() {
            return Err(ReplayError::Empty);
        }
        let mut out = Vec::with_capacity(batch);
        match &self.prioritized {
            None => {
                for _ in 0..batch {
                    let index = rng.gen_range(0..self.items.len());
                    out.push(Sample {
                        index,
                        item: &self.items[index],
                        probability: 1.0 / self.items.len() as f64,
                    });
                }
            }
            Some(p) => {
                let total = p.tree.total();
                if total <= 0.0 {
                    return Err(ReplayError::AllZero);
                }
                let segment = total / batch as f64;
                for k in 0..batch {
                    let mass = segment * (k as f64 + rng.gen::<f64>());
                    let index = p.tree.find(mass.min(total * (1.0 - f64::EPSILON))).min(self.items.len() - 1);
                    out.push(Sample {
                        index,
                        item: &self.items[index],
                        probability: p.tree.get(index) / total,
                    });
                }
            }
        }
        Ok(out)
    }

    /// Sets a slot's raw priority (before the exponent). No-op when uniform.
    pub fn update_priority(&mut self, index: usize, priority: f64) -> Result<(), ReplayError> {
        if !(priority.is_finite() && priority > 0.0) {
            return Err(ReplayError::InvalidPriority(priority));
        }
        if let Some(p) = &mut self.prioritized {
            p.max_priority = p.max_priority.max(priority);
            p.tree.set(index, priority.powf(p.alpha));
        }
        Ok(())
    }
}
