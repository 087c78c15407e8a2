//! Fixed-capacity experience replay with first-in-first-out eviction.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

/// One stored interaction step.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

/// Ring buffer of transitions. When full, each insertion overwrites the
/// oldest entry.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    capacity: usize,
    buf: Vec<Transition>,
    /// Slot that the next insertion overwrites once the buffer is full.
    next: usize,
    inserted: u64,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayMemory {
            capacity,
            buf: Vec::with_capacity(capacity.min(1 << 20)),
            next: 0,
            inserted: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn total_inserted(&self) -> u64 {
        self.inserted
    }

    pub fn push(&mut self, t: Transition) {
        if self.buf.len() < self.capacity {
            self.buf.push(t);
        } else {
            self.buf[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
        self.inserted += 1;
    }

    /// Uniform minibatch with replacement; draws exactly `batch_size` values
    /// from the RNG, keeping stream consumption schedule-independent.
    pub fn sample<'a>(&'a self, batch_size: usize, rng: &mut ChaCha12Rng) -> Vec<&'a Transition> {
        assert!(!self.buf.is_empty(), "cannot sample from empty memory");
        (0..batch_size)
            .map(|_| &self.buf[rng.gen_range(0..self.buf.len())])
            .collect()
    }

    /// Contents ordered oldest-first.
    pub fn iter_insertion_order(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.buf.len() < self.capacity {
            0
        } else {
            self.next
        };
        self.buf[split..].iter().chain(self.buf[..split].iter())
    }
}
