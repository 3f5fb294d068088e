use std::sync::{Arc, Mutex};
use std::time::Duration;

use super::Clock;

/// Token bucket shared by all workers dispatching to one backend.
pub struct TokenBucket {
    capacity: f64,
    refill_per_second: f64,
    clock: Arc<dyn Clock>,
    state: Mutex<BucketState>,
}

struct BucketState {
    tokens: f64,
    last_refill: Duration,
}

impl TokenBucket {
    /// Starts full.
    pub fn new(capacity: u32, refill_per_second: f64, clock: Arc<dyn Clock>) -> Self {
        let capacity = f64::from(capacity.max(1));
        let last_refill = clock.now();
        Self {
            capacity,
            refill_per_second,
            clock,
            state: Mutex::new(BucketState {
                tokens: capacity,
                last_refill,
            }),
        }
    }

    /// Take one token if available; otherwise report how long until one is.
    pub fn try_acquire(&self) -> Result<(), Duration> {
        let mut state = self.state.lock().unwrap();
        let now = self.clock.now();
        let elapsed = now.saturating_sub(state.last_refill).as_secs_f64();
        state.tokens = (state.tokens + elapsed * self.refill_per_second).min(self.capacity);
        state.last_refill = now;
        if state.tokens >= 1.0 {
            state.tokens -= 1.0;
            Ok(())
        } else {
            let missing = 1.0 - state.tokens;
            Err(Duration::from_secs_f64(missing / self.refill_per_second))
        }
    }

    /// Block (on the bucket's clock) until a token is available.
    pub fn acquire(&self) {
        while let Err(wait) = self.try_acquire() {
            self.clock.sleep(wait);
        }
    }
}
