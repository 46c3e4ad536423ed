//! Sliding-window rate limiter for outbound search requests.

use super::Clock;
use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

/// At most `ceiling` acquisitions per rolling `window`; `acquire` blocks
/// (through the clock, so tests can use a virtual one) until a slot frees.
pub struct RateLimiter {
    ceiling: usize,
    window: Duration,
    recent: Mutex<VecDeque<Instant>>,
    clock: Arc<dyn Clock>,
}

impl RateLimiter {
    pub fn new(ceiling: usize, window: Duration, clock: Arc<dyn Clock>) -> Self {
        assert!(ceiling >= 1, "rate limiter ceiling must be at least 1");
        Self { ceiling, window, recent: Mutex::new(VecDeque::new()), clock }
    }

    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut recent = self.recent.lock().expect("limiter lock poisoned");
                let now = self.clock.now();
                while let Some(front) = recent.front() {
                    if now.duration_since(*front) >= self.window {
                        recent.pop_front();
                    } else {
                        break;
                    }
                }
                if recent.len() < self.ceiling {
                    recent.push_back(now);
                    return;
                }
                self.window - now.duration_since(*recent.front().expect("queue is full"))
            };
            self.clock.sleep(wait);
        }
    }
}
