use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

pub const MIN_EPSILON: f64 = 0.01;

/// Success rate over the most recent `window` greedy evaluations of one
/// option, and the exploration rate derived from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessTracker {
    window: usize,
    recent: VecDeque<bool>,
    pub evaluations: u64,
}

impl SuccessTracker {
    pub fn new(window: usize) -> SuccessTracker {
        assert!(window > 0, "window must be positive");
        SuccessTracker {
            window,
            recent: VecDeque::with_capacity(window),
            evaluations: 0,
        }
    }

    pub fn record(&mut self, success: bool) {
        if self.recent.len() == self.window {
            self.recent.pop_front();
        }
        self.recent.push_back(success);
        self.evaluations += 1;
    }

    /// Zero when nothing has been evaluated yet.
    pub fn success_rate(&self) -> f64 {
        if self.recent.is_empty() {
            return 0.0;
        }
        self.recent.iter().filter(|s| **s).count() as f64 / self.recent.len() as f64
    }

    pub fn epsilon(&self) -> f64 {
        epsilon_for(self.success_rate())
    }

    pub fn recent(&self) -> impl Iterator<Item = bool> + '_ {
        self.recent.iter().copied()
    }
}

pub fn epsilon_for(success_rate: f64) -> f64 {
    (1.0 - success_rate).clamp(MIN_EPSILON, 1.0)
}
