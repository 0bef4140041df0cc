use std::collections::VecDeque;

/// The most recent epoch-mean raw KL values; their median scales bonuses.
#[derive(Debug, Clone, PartialEq)]
pub struct KlQueue {
    values: VecDeque<f64>,
    capacity: usize,
}

impl KlQueue {
    pub fn new(capacity: usize) -> Self {
        Self {
            values: VecDeque::with_capacity(capacity),
            capacity: capacity.max(1),
        }
    }

    pub fn push(&mut self, value: f64) {
        if self.values.len() == self.capacity {
            self.values.pop_front();
        }
        self.values.push_back(value);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Median of the contents; `None` when empty.
    pub fn median(&self) -> Option<f64> {
        if self.values.is_empty() {
            return None;
        }
        let mut v: Vec<f64> = self.values.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
    }

    /// Divisor applied to raw KL values: the median, or 1 when the queue is
    /// empty or its median is not positive.
    pub fn normalizer(&self) -> f64 {
        match self.median() {
            Some(m) if m > 0.0 && m.is_finite() => m,
            _ => 1.0,
        }
    }
}
