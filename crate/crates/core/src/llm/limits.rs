use std::collections::VecDeque;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

/// Counting semaphore bounding concurrent backend calls.
pub struct InFlightLimiter {
    state: Mutex<(usize, usize)>,
    cv: Condvar,
    max: usize,
}

pub struct Permit<'a> {
    limiter: &'a InFlightLimiter,
}

impl InFlightLimiter {
    pub fn new(max: usize) -> Self {
        Self { state: Mutex::new((0, 0)), cv: Condvar::new(), max: max.max(1) }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut guard = self.state.lock().expect("limiter poisoned");
        while guard.0 >= self.max {
            guard = self.cv.wait(guard).expect("limiter poisoned");
        }
        guard.0 += 1;
        guard.1 = guard.1.max(guard.0);
        Permit { limiter: self }
    }

    pub fn peak(&self) -> usize {
        self.state.lock().expect("limiter poisoned").1
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut guard = self.limiter.state.lock().expect("limiter poisoned");
        guard.0 -= 1;
        self.limiter.cv.notify_one();
    }
}

/// Sliding one-minute window of spent tokens.
pub struct TokenBudget {
    window: Duration,
    limit: u64,
    spent: Mutex<VecDeque<(Instant, u64)>>,
}

impl TokenBudget {
    pub fn per_minute(limit: u64) -> Self {
        Self::with_window(limit, Duration::from_secs(60))
    }

    pub fn with_window(limit: u64, window: Duration) -> Self {
        Self { window, limit, spent: Mutex::new(VecDeque::new()) }
    }

    /// Blocks until `tokens` fit in the window. A single request larger than
    /// the whole limit is admitted once the window is empty.
    pub fn acquire(&self, tokens: u64) {
        loop {
            let wait = {
                let mut spent = self.spent.lock().expect("budget poisoned");
                let now = Instant::now();
                while spent.front().is_some_and(|(t, _)| now.duration_since(*t) >= self.window) {
                    spent.pop_front();
                }
                let used: u64 = spent.iter().map(|(_, n)| n).sum();
                if spent.is_empty() || used + tokens <= self.limit {
                    spent.push_back((now, tokens));
                    return;
                }
                let oldest = spent.front().map(|(t, _)| *t).unwrap_or(now);
                self.window.saturating_sub(now.duration_since(oldest))
            };
            std::thread::sleep(wait.max(Duration::from_millis(1)));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_delays_when_window_full() {
        let budget = TokenBudget::with_window(100, Duration::from_millis(60));
        let start = Instant::now();
        budget.acquire(80);
        budget.acquire(80);
        assert!(start.elapsed() >= Duration::from_millis(50));
    }

    #[test]
    fn oversized_request_admitted_alone() {
        let budget = TokenBudget::with_window(10, Duration::from_millis(20));
        budget.acquire(500);
    }
}
