//! Exponential backoff shared by the HTTP clients.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    /// Total attempts including the first one.
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
    /// Wall-clock budget for all attempts and sleeps together.
    pub budget_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 6, base_delay_ms: 500, max_delay_ms: 30_000, budget_ms: 120_000 }
    }
}

/// Outcome of a single attempt as seen by the retry loop.
pub enum Attempt<T, E> {
    Done(T),
    /// Transient failure; `retry_after` overrides the computed delay.
    Retry { error: E, retry_after: Option<Duration> },
    Fatal(E),
}

impl RetryPolicy {
    /// Delay before attempt `n + 1` (attempts are 1-based): base * 2^(n-1),
    /// capped at `max_delay_ms`.
    pub fn delay_after(&self, attempt: u32) -> Duration {
        let exp = attempt.saturating_sub(1).min(30);
        let ms = self.base_delay_ms.saturating_mul(1u64 << exp).min(self.max_delay_ms);
        Duration::from_millis(ms)
    }

    /// Runs `op` until it succeeds, fails fatally, runs out of attempts or
    /// would exceed the wall-clock budget. Returns the value and the number
    /// of attempts used, or the last error.
    pub fn run<T, E>(&self, mut op: impl FnMut(u32) -> Attempt<T, E>) -> Result<(T, u32), (E, u32)> {
        let started = Instant::now();
        let budget = Duration::from_millis(self.budget_ms);
        let max = self.max_attempts.max(1);
        let mut attempt = 1;
        loop {
            match op(attempt) {
                Attempt::Done(v) => return Ok((v, attempt)),
                Attempt::Fatal(e) => return Err((e, attempt)),
                Attempt::Retry { error, retry_after } => {
                    if attempt >= max {
                        return Err((error, attempt));
                    }
                    let delay = retry_after.unwrap_or_else(|| self.delay_after(attempt)).min(Duration::from_millis(self.max_delay_ms));
                    if started.elapsed() + delay > budget {
                        log::warn!("retry budget of {} ms exhausted after {attempt} attempts", self.budget_ms);
                        return Err((error, attempt));
                    }
                    std::thread::sleep(delay);
                    attempt += 1;
                }
            }
        }
    }
}
