//! Fixed-capacity experience replay.

use rand::seq::index::sample;
use rand::Rng;

use super::Transition;

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            items: Vec::new(),
            next: 0,
        }
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

    /// Appends, overwriting the oldest entry once full.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Uniform sample of distinct indices; `None` when too few are stored.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Option<Vec<usize>> {
        (n <= self.items.len()).then(|| sample(rng, self.items.len(), n).into_vec())
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.items[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Action, StateVector};
    use crate::rng::stream;

    fn t(i: usize) -> Transition {
        Transition {
            state: StateVector([i as f64; 16]),
            action: Action::Maintain,
            reward: i as f64,
            next_state: StateVector([0.0; 16]),
            terminal: false,
        }
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut b = ReplayBuffer::new(3);
        for i in 0..5 {
            b.push(t(i));
        }
        assert_eq!(b.len(), 3);
        let mut rewards: Vec<f64> = (0..3).map(|i| b.get(i).reward).collect();
        rewards.sort_by(f64::total_cmp);
        assert_eq!(rewards, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn insufficient_returns_none() {
        let mut b = ReplayBuffer::new(10);
        b.push(t(0));
        assert!(b.sample_indices(2, &mut stream(0, "r", 0)).is_none());
    }

    #[test]
    fn sampling_is_uniform_without_replacement() {
        let mut b = ReplayBuffer::new(100);
        for i in 0..100 {
            b.push(t(i));
        }
        let mut rng = stream(42, "replay", 0);
        let mut counts = [0usize; 100];
        let batches = 10_000;
        for _ in 0..batches {
            let idx = b.sample_indices(64, &mut rng).unwrap();
            let mut seen = idx.clone();
            seen.sort_unstable();
            seen.dedup();
            assert_eq!(seen.len(), 64);
            for i in idx {
                counts[i] += 1;
            }
        }
        let expected = batches as f64 * 64.0 / 100.0;
        for c in counts {
            assert!((c as f64 - expected).abs() / expected < 0.05);
        }
    }
}
