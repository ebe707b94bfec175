//! Injectable time sources.

/// Millisecond clock. Takes `&mut self` so virtual clocks can advance on read.
pub trait Clock {
    fn now_ms(&mut self) -> i64;
}

/// Deterministic clock that advances by a fixed step on every read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VirtualClock {
    next: i64,
    step: i64,
}

impl VirtualClock {
    pub const fn new(start_ms: i64, step_ms: i64) -> Self {
        Self {
            next: start_ms,
            step: step_ms,
        }
    }

    pub const fn peek(&self) -> i64 {
        self.next
    }
}

impl Default for VirtualClock {
    fn default() -> Self {
        Self::new(0, 1_000)
    }
}

impl Clock for VirtualClock {
    fn now_ms(&mut self) -> i64 {
        let now = self.next;
        self.next += self.step;
        now
    }
}

impl<F: FnMut() -> i64> Clock for F {
    fn now_ms(&mut self) -> i64 {
        self()
    }
}
