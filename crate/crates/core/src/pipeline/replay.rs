use std::collections::VecDeque;

use rand::Rng as _;

use crate::Rng;

/// One environment step. `a` is the action as applied by the environment.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub r: f64,
    pub s_next: Vec<f64>,
    pub done: bool,
}

/// FIFO ring of raw transitions; the oldest entry is evicted first.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    items: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        Self {
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity: capacity.max(1),
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
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

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    /// Uniform draw with replacement.
    pub fn sample(&self, n: usize, rng: &mut Rng) -> Vec<&Transition> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..n)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(i: usize) -> Transition {
        Transition {
            s: vec![i as f64],
            a: vec![0.0],
            r: 0.0,
            s_next: vec![i as f64 + 1.0],
            done: false,
        }
    }

    proptest! {
        #[test]
        fn evicts_oldest_first(capacity in 1usize..20, pushes in 0usize..60) {
            let mut mem = ReplayMemory::new(capacity);
            for i in 0..pushes {
                mem.push(t(i));
            }
            let kept: Vec<usize> = mem.iter().map(|x| x.s[0] as usize).collect();
            let start = pushes.saturating_sub(capacity);
            prop_assert_eq!(kept, (start..pushes).collect::<Vec<_>>());
        }
    }

    #[test]
    fn sampling_empty_memory_is_empty() {
        let mem = ReplayMemory::new(4);
        assert!(mem.sample(3, &mut crate::seeded_rng(0)).is_empty());
    }
}
