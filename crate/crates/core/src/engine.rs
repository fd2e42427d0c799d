//! Discrete-event core.
//!
//! Time is an integer count of microseconds. Events at equal timestamps are
//! dispatched in scheduling order. Every stochastic component draws from its
//! own named stream, derived from the master seed, so that perturbing one
//! component never shifts the draws seen by another.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Simulation instant or span, in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * 1_000_000)
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }

    /// Exact decimal rendering in seconds with trailing zeros trimmed
    /// (`5000` µs renders as `0.005`).
    pub fn to_secs_string(self) -> String {
        let whole = self.0 / 1_000_000;
        let frac = self.0 % 1_000_000;
        if frac == 0 {
            return whole.to_string();
        }
        let digits = format!("{frac:06}");
        format!("{whole}.{}", digits.trim_end_matches('0'))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 += rhs.0;
    }
}

impl std::ops::Mul<u64> for SimTime {
    type Output = SimTime;
    fn mul(self, rhs: u64) -> SimTime {
        SimTime(self.0 * rhs)
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(
            self.0
                .checked_sub(rhs.0)
                .expect("SimTime subtraction underflow"),
        )
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}s", self.to_secs_string())
    }
}

/// HS-DSCH transmission time interval.
pub const TTI: SimTime = SimTime::from_millis(2);
/// RNC to Node-B frame period.
pub const FRAME_PERIOD: SimTime = SimTime::from_millis(10);

/// Handle returned by [`EventQueue::schedule`]; used to cancel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventId(u64);

struct Entry<E> {
    time: SimTime,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueueStats {
    pub scheduled: u64,
    pub dispatched: u64,
    pub cancelled: u64,
}

/// Pending-event set ordered by `(fire_time, seq)`.
pub struct EventQueue<E> {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<Entry<E>>,
    pending: HashSet<u64>,
    stats: QueueStats,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self {
            now: SimTime::ZERO,
            next_seq: 0,
            heap: BinaryHeap::new(),
            pending: HashSet::new(),
            stats: QueueStats::default(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Schedules `event` at `at`.
    ///
    /// Panics when `at` lies in the past: that is a model bug, and continuing
    /// would break the monotone clock.
    pub fn schedule(&mut self, at: SimTime, event: E) -> EventId {
        assert!(
            at >= self.now,
            "event scheduled in the past: at={at} now={}",
            self.now
        );
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry {
            time: at,
            seq,
            event,
        });
        self.pending.insert(seq);
        self.stats.scheduled += 1;
        EventId(seq)
    }

    pub fn schedule_in(&mut self, delay: SimTime, event: E) -> EventId {
        self.schedule(self.now + delay, event)
    }

    /// Returns true and suppresses dispatch iff the event has not fired yet.
    pub fn cancel(&mut self, id: EventId) -> bool {
        if self.pending.remove(&id.0) {
            self.stats.cancelled += 1;
            true
        } else {
            false
        }
    }

    pub fn is_pending(&self, id: EventId) -> bool {
        self.pending.contains(&id.0)
    }

    /// Number of live (scheduled, not yet dispatched or cancelled) events.
    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn stats(&self) -> QueueStats {
        self.stats
    }

    /// Pops the next live event with `fire_time <= limit`, advancing the clock.
    pub fn pop_until(&mut self, limit: SimTime) -> Option<(SimTime, E)> {
        loop {
            let head = self.heap.peek()?;
            if head.time > limit {
                return None;
            }
            let entry = self.heap.pop().expect("peeked");
            if !self.pending.remove(&entry.seq) {
                // cancelled; drop lazily
                continue;
            }
            debug_assert!(entry.time >= self.now);
            self.now = entry.time;
            self.stats.dispatched += 1;
            return Some((entry.time, entry.event));
        }
    }

    /// Moves the clock forward without dispatching; never moves it back.
    pub fn advance_to(&mut self, t: SimTime) {
        if t > self.now {
            self.now = t;
        }
    }
}

/// A simulated system driven by an [`EventQueue`].
pub trait Model {
    type Event;
    type Output;

    /// Seeds the initial events.
    fn start(&mut self, queue: &mut EventQueue<Self::Event>);

    fn handle(&mut self, now: SimTime, event: Self::Event, queue: &mut EventQueue<Self::Event>);

    /// Flushes metrics after the last dispatched event.
    fn finish(&mut self, queue: &EventQueue<Self::Event>) -> Self::Output;
}

/// One simulation instance. Owns all of its state, so it can be moved to a
/// worker thread as a unit.
pub struct Simulation<M: Model> {
    model: M,
    queue: EventQueue<M::Event>,
    started: bool,
}

impl<M: Model> Simulation<M> {
    pub fn new(model: M) -> Self {
        Self {
            model,
            queue: EventQueue::new(),
            started: false,
        }
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn queue(&self) -> &EventQueue<M::Event> {
        &self.queue
    }

    /// Dispatches every event up to and including `t_end`, then finalizes.
    pub fn run_until(&mut self, t_end: SimTime) -> M::Output {
        if !self.started {
            self.model.start(&mut self.queue);
            self.started = true;
        }
        while let Some((now, ev)) = self.queue.pop_until(t_end) {
            self.model.handle(now, ev, &mut self.queue);
        }
        self.queue.advance_to(t_end);
        self.model.finish(&self.queue)
    }
}

pub type SimRng = ChaCha8Rng;

/// FNV-1a over bytes; stable across hosts and toolchains.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-sensitive mix of several words into one seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x6a09_e667_f3bc_c909, |acc, p| splitmix(acc ^ splitmix(*p)))
}

/// Named, independently seeded random streams for one run.
#[derive(Debug, Clone, Copy)]
pub struct RngStreams {
    master_seed: u64,
}

impl RngStreams {
    pub const SHADOWING: &'static str = "shadowing";
    pub const PLACEMENT: &'static str = "user-placement";
    pub const DECODE: &'static str = "decode";
    pub const TRAFFIC: &'static str = "traffic";

    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream(&self, name: &str) -> SimRng {
        SimRng::seed_from_u64(derive_seed(&[self.master_seed, fnv1a(name.as_bytes())]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    enum Ev {
        A,
        B,
    }

    #[test]
    fn fifo_tie_break() {
        let mut q = EventQueue::new();
        q.schedule(SimTime::ZERO, Ev::A);
        q.schedule(SimTime::ZERO, Ev::B);
        assert_eq!(q.pop_until(SimTime::ZERO).map(|e| e.1), Some(Ev::A));
        assert_eq!(q.pop_until(SimTime::ZERO).map(|e| e.1), Some(Ev::B));
        assert!(q.pop_until(SimTime::from_secs(1)).is_none());
    }

    #[test]
    fn fires_at_scheduled_time() {
        let mut q = EventQueue::new();
        q.advance_to(SimTime::from_micros(500));
        q.schedule_in(TTI, Ev::A);
        let (t, _) = q.pop_until(SimTime::from_secs(1)).unwrap();
        assert_eq!(t, SimTime::from_micros(2_500));
        assert_eq!(q.now(), t);
    }

    #[test]
    #[should_panic(expected = "scheduled in the past")]
    fn scheduling_in_the_past_halts() {
        let mut q = EventQueue::new();
        q.advance_to(SimTime::from_millis(10));
        q.schedule(SimTime::from_millis(9), Ev::A);
    }

    #[test]
    fn cancel_semantics() {
        let mut q = EventQueue::new();
        let a = q.schedule(SimTime::from_millis(1), Ev::A);
        let b = q.schedule(SimTime::from_millis(2), Ev::B);
        assert!(q.cancel(a));
        assert!(!q.cancel(a));
        let (_, ev) = q.pop_until(SimTime::from_secs(1)).unwrap();
        assert_eq!(ev, Ev::B);
        assert!(!q.cancel(b), "already dispatched");
        let s = q.stats();
        assert_eq!(s.scheduled, s.dispatched + s.cancelled + q.pending_len() as u64);
    }

    #[test]
    fn random_times_dispatch_in_sorted_order() {
        let mut rng = RngStreams::new(7).stream("test");
        let mut q = EventQueue::new();
        let mut expected = Vec::new();
        for i in 0..10_000u32 {
            let t = SimTime::from_micros(rng.random_range(0..5_000));
            q.schedule(t, i);
            expected.push((t, i));
        }
        // independent oracle: stable sort by time keeps insertion order among ties
        expected.sort_by_key(|(t, _)| *t);
        let mut got = Vec::new();
        while let Some(e) = q.pop_until(SimTime::from_secs(1)) {
            got.push(e);
        }
        assert_eq!(got, expected);
    }

    #[test]
    fn rto_restart_pattern_fires_only_last_instance() {
        let mut q = EventQueue::new();
        let mut live: Option<EventId> = None;
        let mut live_count = 0i32;
        for i in 0..1000u64 {
            if let Some(id) = live.take() {
                if q.cancel(id) {
                    live_count -= 1;
                }
            }
            live = Some(q.schedule(SimTime::from_millis(1000 + i), i));
            live_count += 1;
            assert_eq!(live_count, 1);
        }
        let fired: Vec<u64> = std::iter::from_fn(|| q.pop_until(SimTime::from_secs(10)))
            .map(|(_, e)| e)
            .collect();
        assert_eq!(fired, vec![999]);
        let s = q.stats();
        assert_eq!(s.scheduled, 1000);
        assert_eq!(s.cancelled, 999);
        assert_eq!(s.dispatched, 1);
    }

    #[test]
    fn streams_are_independent_of_interleaving() {
        let streams = RngStreams::new(42);
        let mut a1 = streams.stream(RngStreams::SHADOWING);
        let seq1: Vec<u64> = (0..16).map(|_| a1.random()).collect();

        let mut a2 = streams.stream(RngStreams::SHADOWING);
        let mut b = streams.stream(RngStreams::DECODE);
        let mut seq2 = Vec::new();
        for _ in 0..16 {
            let _: u64 = b.random();
            let _: u64 = b.random();
            seq2.push(a2.random::<u64>());
        }
        assert_eq!(seq1, seq2);

        let mut other = RngStreams::new(43).stream(RngStreams::SHADOWING);
        assert_ne!(seq1[0], other.random::<u64>());
    }

    #[test]
    fn secs_rendering_is_exact() {
        assert_eq!(SimTime::from_micros(5_000).to_secs_string(), "0.005");
        assert_eq!(SimTime::from_secs(120).to_secs_string(), "120");
        assert_eq!(SimTime::from_micros(1_250_010).to_secs_string(), "1.25001");
    }

    struct Ticker {
        ticks: u64,
    }

    impl Model for Ticker {
        type Event = ();
        type Output = u64;
        fn start(&mut self, q: &mut EventQueue<()>) {
            q.schedule(SimTime::ZERO, ());
        }
        fn handle(&mut self, _now: SimTime, _ev: (), q: &mut EventQueue<()>) {
            self.ticks += 1;
            q.schedule_in(TTI, ());
        }
        fn finish(&mut self, _q: &EventQueue<()>) -> u64 {
            self.ticks
        }
    }

    #[test]
    fn session_dispatches_sixty_thousand_ttis() {
        // ticks at 0, 2ms, ..., 119.998s: 120 s / 2 ms
        let mut sim = Simulation::new(Ticker { ticks: 0 });
        let end = SimTime::from_secs(120);
        let n = sim.run_until(end - SimTime::from_micros(1));
        assert_eq!(n, 60_000);
    }

    #[test]
    fn empty_run_to_zero() {
        struct Idle;
        impl Model for Idle {
            type Event = ();
            type Output = u64;
            fn start(&mut self, _q: &mut EventQueue<()>) {}
            fn handle(&mut self, _: SimTime, _: (), _: &mut EventQueue<()>) {
                unreachable!()
            }
            fn finish(&mut self, q: &EventQueue<()>) -> u64 {
                q.stats().dispatched
            }
        }
        let mut sim = Simulation::new(Idle);
        assert_eq!(sim.run_until(SimTime::ZERO), 0);
        assert_eq!(sim.queue().now(), SimTime::ZERO);
    }
}
