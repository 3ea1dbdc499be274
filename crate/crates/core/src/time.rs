//! Virtual time for the discrete-event core.
//!
//! [`SimTime`] counts nanoseconds since mission start. Integer time keeps the
//! event order exact and reruns byte-identical; conversions to and from `f64`
//! seconds exist for configuration and trace output.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::ops::{Add, Sub};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

/// A point on the virtual timeline, nanoseconds since mission start.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_nanos(nanos: u64) -> Self {
        SimTime(nanos)
    }

    pub const fn from_secs(secs: u64) -> Self {
        SimTime(secs * 1_000_000_000)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000_000)
    }

    /// Rounds to the nearest nanosecond. Negative and NaN inputs clamp to zero.
    pub fn from_secs_f64(secs: f64) -> Self {
        if secs.is_nan() || secs <= 0.0 {
            return SimTime(0);
        }
        SimTime((secs * 1e9).round() as u64)
    }

    pub const fn as_nanos(self) -> u64 {
        self.0
    }

    pub const fn as_millis(self) -> u64 {
        self.0 / 1_000_000
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e9
    }

    pub fn saturating_sub(self, other: SimTime) -> Duration {
        Duration::from_nanos(self.0.saturating_sub(other.0))
    }
}

impl Add<Duration> for SimTime {
    type Output = SimTime;

    fn add(self, rhs: Duration) -> SimTime {
        SimTime(self.0 + rhs.as_nanos() as u64)
    }
}

impl Sub for SimTime {
    type Output = Duration;

    fn sub(self, rhs: SimTime) -> Duration {
        debug_assert!(self >= rhs, "negative virtual duration: {self} - {rhs}");
        self.saturating_sub(rhs)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}s", self.as_secs_f64())
    }
}

/// Duration from fractional seconds, rounded to the nanosecond.
pub fn secs(secs: f64) -> Duration {
    Duration::from_nanos((secs * 1e9).round().max(0.0) as u64)
}

struct Scheduled<E> {
    at: SimTime,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Scheduled<E> {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}

impl<E> Eq for Scheduled<E> {}

impl<E> PartialOrd for Scheduled<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Scheduled<E> {
    // BinaryHeap is a max-heap; invert so the earliest (time, insertion) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.at.cmp(&self.at).then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Event queue plus the current virtual time.
///
/// Time never decreases. Events at equal time fire in insertion order.
pub struct VirtualClock<E> {
    now: SimTime,
    next_seq: u64,
    queue: BinaryHeap<Scheduled<E>>,
}

impl<E> Default for VirtualClock<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> VirtualClock<E> {
    pub fn new() -> Self {
        VirtualClock {
            now: SimTime::ZERO,
            next_seq: 0,
            queue: BinaryHeap::new(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    /// Schedules `event` at `at`. Times in the past are clamped to `now`.
    pub fn schedule(&mut self, at: SimTime, event: E) {
        let at = at.max(self.now);
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Scheduled { at, seq, event });
    }

    pub fn schedule_in(&mut self, delay: Duration, event: E) {
        self.schedule(self.now + delay, event);
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.queue.peek().map(|s| s.at)
    }

    /// Pops the next event if it is due at or before `until`, advancing `now`
    /// to its time.
    pub fn pop_until(&mut self, until: SimTime) -> Option<(SimTime, E)> {
        if self.queue.peek()?.at > until {
            return None;
        }
        let s = self.queue.pop()?;
        self.now = s.at;
        Some((s.at, s.event))
    }

    /// Fires every event with time `<= until` in (time, insertion) order and
    /// leaves `now == until`.
    pub fn step(&mut self, until: SimTime) -> Vec<(SimTime, E)> {
        let mut fired = Vec::new();
        while let Some(ev) = self.pop_until(until) {
            fired.push(ev);
        }
        self.advance_to(until);
        fired
    }

    /// Moves `now` forward without firing anything. Never moves backwards.
    pub fn advance_to(&mut self, t: SimTime) {
        if t > self.now {
            self.now = t;
        }
    }
}

/// Paces the discrete-event core against some notion of time.
pub trait TimeSource {
    /// Blocks until virtual time `t` may be processed.
    fn wait_until(&mut self, t: SimTime);
}

/// No pacing: events are processed as fast as possible.
#[derive(Debug, Default, Clone, Copy)]
pub struct Virtual;

impl TimeSource for Virtual {
    fn wait_until(&mut self, _t: SimTime) {}
}

/// One virtual second per wall-clock second.
#[derive(Debug, Clone, Copy)]
pub struct WallClock {
    start: Instant,
}

impl WallClock {
    pub fn start_now() -> Self {
        WallClock { start: Instant::now() }
    }

    pub fn elapsed(&self) -> SimTime {
        SimTime::from_nanos(self.start.elapsed().as_nanos() as u64)
    }
}

impl TimeSource for WallClock {
    fn wait_until(&mut self, t: SimTime) {
        let now = self.elapsed();
        if t > now {
            std::thread::sleep(t - now);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_queue_advances() {
        let mut clock: VirtualClock<()> = VirtualClock::new();
        let fired = clock.step(SimTime::from_secs(10));
        assert!(fired.is_empty());
        assert_eq!(clock.now(), SimTime::from_secs(10));
    }

    #[test]
    fn equal_times_fire_in_insertion_order() {
        let mut clock = VirtualClock::new();
        clock.schedule(SimTime::from_secs(1), "a");
        clock.schedule(SimTime::from_secs(1), "b");
        clock.schedule(SimTime::from_millis(500), "c");
        clock.schedule(SimTime::from_secs(1), "d");
        let order: Vec<_> = clock.step(SimTime::from_secs(2)).into_iter().map(|(_, e)| e).collect();
        assert_eq!(order, vec!["c", "a", "b", "d"]);
    }

    #[test]
    fn event_at_bound_fires() {
        let mut clock = VirtualClock::new();
        clock.schedule(SimTime::from_secs(5), 1);
        clock.schedule(SimTime::from_nanos(5_000_000_001), 2);
        let fired = clock.step(SimTime::from_secs(5));
        assert_eq!(fired, vec![(SimTime::from_secs(5), 1)]);
        assert_eq!(clock.len(), 1);
    }

    #[test]
    fn time_never_decreases() {
        let mut clock = VirtualClock::new();
        clock.step(SimTime::from_secs(3));
        clock.schedule(SimTime::from_secs(1), ());
        let fired = clock.step(SimTime::from_secs(3));
        assert_eq!(fired[0].0, SimTime::from_secs(3));
        clock.advance_to(SimTime::from_secs(2));
        assert_eq!(clock.now(), SimTime::from_secs(3));
    }

    #[test]
    fn seconds_round_trip() {
        assert_eq!(SimTime::from_secs_f64(0.5).as_nanos(), 500_000_000);
        assert_eq!(SimTime::from_secs_f64(-1.0), SimTime::ZERO);
        assert_eq!(secs(1.0 / 3.0).as_nanos(), 333_333_333);
    }
}
