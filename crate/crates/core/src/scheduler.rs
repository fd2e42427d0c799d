//! Per-TTI user selection, MAC-hs PDU assembly and UE-side reordering.

use std::collections::BTreeMap;

use crate::buffer::{FlowClass, MacdPdu, Selection, TspBuffer};
use crate::engine::SimTime;
use crate::radio::AmcDecision;

/// Default MAC-hs header size for a single-queue block.
pub const MAC_HS_HEADER_BITS: u32 = 21;

/// One transport block on the HS-DSCH.
#[derive(Debug, Clone, PartialEq)]
pub struct MacHsPdu {
    pub ue: usize,
    pub flow: FlowClass,
    pub sdus: Vec<MacdPdu>,
    /// Payload of saturated background users, who carry no MAC-d PDUs.
    pub filler_bits: u32,
    pub header_bits: u32,
    pub harq_pid: usize,
    pub tsn: u64,
    pub transmitted_at: SimTime,
}

impl MacHsPdu {
    pub fn payload_bits(&self) -> u32 {
        self.sdus.iter().map(|s| s.size_bits).sum::<u32>() + self.filler_bits
    }

    pub fn total_bits(&self) -> u32 {
        self.header_bits + self.payload_bits()
    }
}

/// Skip-empty round robin over a fixed user set.
#[derive(Debug, Clone)]
pub struct RoundRobin {
    users: usize,
    cursor: usize,
}

impl RoundRobin {
    pub fn new(users: usize) -> Self {
        assert!(users > 0, "scheduler needs at least one user");
        Self { users, cursor: 0 }
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    /// Serves the first user at or after the cursor that `can_transmit`
    /// accepts; the cursor moves just past it. Returns `None` (cursor
    /// unchanged) if nobody can transmit.
    pub fn schedule(&mut self, mut can_transmit: impl FnMut(usize) -> bool) -> Option<usize> {
        for step in 0..self.users {
            let ue = (self.cursor + step) % self.users;
            if can_transmit(ue) {
                self.cursor = (ue + 1) % self.users;
                return Some(ue);
            }
        }
        None
    }
}

/// Fills a transport block from the class the buffer policy selects.
/// `None` when the buffer is empty or the channel allows no transmission.
pub fn build_transport_block(
    ue: usize,
    buffer: &mut TspBuffer,
    amc: Option<AmcDecision>,
    header_bits: u32,
    harq_pid: usize,
    tsn: &mut [u64; 2],
    now: SimTime,
) -> Option<MacHsPdu> {
    let amc = amc?;
    let flow = match buffer.select_flow(now) {
        Selection::Empty => return None,
        s => s.flow().expect("non-empty selection"),
    };
    let room = amc.tbs_bits.saturating_sub(header_bits);
    let sdus = buffer.dequeue_for_tti(flow, room);
    if sdus.is_empty() {
        return None;
    }
    let seq = &mut tsn[flow.index()];
    let block = MacHsPdu {
        ue,
        flow,
        sdus,
        filler_bits: 0,
        header_bits,
        harq_pid,
        tsn: *seq,
        transmitted_at: now,
    };
    *seq += 1;
    Some(block)
}

/// A block for a saturated background user: the whole transport block.
pub fn filler_block(
    ue: usize,
    amc: AmcDecision,
    header_bits: u32,
    harq_pid: usize,
    tsn: u64,
    now: SimTime,
) -> MacHsPdu {
    MacHsPdu {
        ue,
        flow: FlowClass::Nrt,
        sdus: Vec::new(),
        filler_bits: amc.tbs_bits - header_bits,
        header_bits,
        harq_pid,
        tsn,
        transmitted_at: now,
    }
}

/// Timer the caller must schedule: fire `ReorderingQueue::expire(generation)`
/// at `deadline`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReorderTimer {
    pub generation: u64,
    pub deadline: SimTime,
}

/// UE reordering queue for one class: releases blocks in TSN order and
/// gives up on a missing TSN after `timeout`.
#[derive(Debug, Clone)]
pub struct ReorderingQueue<T> {
    next_tsn: u64,
    held: BTreeMap<u64, T>,
    timeout: SimTime,
    timer: Option<ReorderTimer>,
    generation: u64,
    pub late_blocks: u64,
    pub skipped_tsns: u64,
}

impl<T> ReorderingQueue<T> {
    pub fn new(timeout: SimTime) -> Self {
        Self {
            next_tsn: 0,
            held: BTreeMap::new(),
            timeout,
            timer: None,
            generation: 0,
            late_blocks: 0,
            skipped_tsns: 0,
        }
    }

    pub fn next_tsn(&self) -> u64 {
        self.next_tsn
    }

    pub fn held(&self) -> usize {
        self.held.len()
    }

    pub fn held_items(&self) -> impl Iterator<Item = &T> {
        self.held.values()
    }

    pub fn timer(&self) -> Option<ReorderTimer> {
        self.timer
    }

    /// Accepts a decoded block. Returns items released in order and, if a
    /// new stall timer was started, the timer to schedule.
    pub fn receive(&mut self, tsn: u64, item: T, now: SimTime) -> (Vec<T>, Option<ReorderTimer>) {
        if tsn < self.next_tsn || self.held.contains_key(&tsn) {
            self.late_blocks += 1;
            return (Vec::new(), None);
        }
        self.held.insert(tsn, item);
        let out = self.release_consecutive();
        (out, self.rearm(now))
    }

    /// Timer expiry: skips the missing TSNs up to the lowest held block.
    pub fn expire(&mut self, generation: u64, now: SimTime) -> (Vec<T>, Option<ReorderTimer>) {
        match self.timer {
            Some(t) if t.generation == generation => {}
            _ => return (Vec::new(), None),
        }
        self.timer = None;
        if let Some(&lowest) = self.held.keys().next() {
            self.skipped_tsns += lowest - self.next_tsn;
            self.next_tsn = lowest;
        }
        let out = self.release_consecutive();
        (out, self.rearm(now))
    }

    fn release_consecutive(&mut self) -> Vec<T> {
        let mut out = Vec::new();
        while let Some(item) = self.held.remove(&self.next_tsn) {
            out.push(item);
            self.next_tsn += 1;
        }
        if self.held.is_empty() {
            self.timer = None;
        }
        out
    }

    fn rearm(&mut self, now: SimTime) -> Option<ReorderTimer> {
        if self.held.is_empty() || self.timer.is_some() {
            return None;
        }
        self.generation += 1;
        let t = ReorderTimer {
            generation: self.generation,
            deadline: now + self.timeout,
        };
        self.timer = Some(t);
        Some(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::buffer::{BufferConfig, PriorityConfig, Scheme};
    use crate::radio::{select_amc, RadioConfig};

    #[test]
    fn single_user_every_tti() {
        let mut rr = RoundRobin::new(1);
        for _ in 0..100 {
            assert_eq!(rr.schedule(|_| true), Some(0));
        }
    }

    #[test]
    fn five_backlogged_users_share_equally() {
        let mut rr = RoundRobin::new(5);
        let mut served = [0u32; 5];
        for t in 0..10_000 {
            let ue = rr.schedule(|_| true).unwrap();
            assert_eq!(ue, t % 5);
            served[ue] += 1;
        }
        assert_eq!(served, [2000; 5]);
    }

    #[test]
    fn skips_idle_users_and_none_when_all_idle() {
        let mut rr = RoundRobin::new(4);
        assert_eq!(rr.schedule(|_| false), None);
        assert_eq!(rr.cursor(), 0);
        assert_eq!(rr.schedule(|u| u == 2), Some(2));
        assert_eq!(rr.cursor(), 3);
        assert_eq!(rr.schedule(|u| u != 3), Some(0));
    }

    fn buffer() -> TspBuffer {
        TspBuffer::new(Scheme::DynamicTsp, BufferConfig::default(), PriorityConfig::default())
    }

    #[test]
    fn block_capacity_at_top_scheme() {
        let cfg = RadioConfig::default();
        let amc = select_amc(&cfg, 6).unwrap();
        assert_eq!(amc.tbs_bits, 7200);
        let mut b = buffer();
        for s in 0..40 {
            b.admit(MacdPdu::new(FlowClass::Nrt, s, SimTime::ZERO), SimTime::ZERO);
        }
        let mut tsn = [0; 2];
        let blk = build_transport_block(0, &mut b, Some(amc), MAC_HS_HEADER_BITS, 0, &mut tsn, SimTime::ZERO).unwrap();
        assert_eq!(blk.sdus.len(), 22);
        assert!(blk.total_bits() <= amc.tbs_bits);
        assert_eq!(tsn, [0, 1]);
    }

    #[test]
    fn block_is_queue_limited_and_homogeneous() {
        let cfg = RadioConfig::default();
        let amc = select_amc(&cfg, 6);
        let mut b = buffer();
        b.admit(MacdPdu::new(FlowClass::Nrt, 0, SimTime::ZERO), SimTime::ZERO);
        b.admit(MacdPdu::new(FlowClass::Nrt, 1, SimTime::ZERO), SimTime::ZERO);
        let mut tsn = [0; 2];
        let blk = build_transport_block(0, &mut b, amc, MAC_HS_HEADER_BITS, 1, &mut tsn, SimTime::ZERO).unwrap();
        assert_eq!(blk.sdus.len(), 2);
        assert!(blk.sdus.iter().all(|s| s.flow == blk.flow));
        assert!(build_transport_block(0, &mut b, amc, MAC_HS_HEADER_BITS, 1, &mut tsn, SimTime::ZERO).is_none());
    }

    #[test]
    fn no_block_without_cqi() {
        let mut b = buffer();
        b.admit(MacdPdu::new(FlowClass::Nrt, 0, SimTime::ZERO), SimTime::ZERO);
        let mut tsn = [0; 2];
        assert!(build_transport_block(0, &mut b, None, MAC_HS_HEADER_BITS, 0, &mut tsn, SimTime::ZERO).is_none());
        assert_eq!(b.n(), 1);
    }

    #[test]
    fn reordering_in_order_release() {
        let mut q = ReorderingQueue::new(SimTime::from_millis(100));
        for k in 0..5u64 {
            let (out, timer) = q.receive(k, k, SimTime::from_millis(k));
            assert_eq!(out, vec![k]);
            assert!(timer.is_none());
        }
    }

    #[test]
    fn reordering_holds_until_gap_filled() {
        let mut q = ReorderingQueue::new(SimTime::from_millis(100));
        let (out, timer) = q.receive(1, 'b', SimTime::ZERO);
        assert!(out.is_empty());
        assert!(timer.is_some());
        let (out, _) = q.receive(0, 'a', SimTime::from_millis(12));
        assert_eq!(out, vec!['a', 'b']);
        assert!(q.timer().is_none());
    }

    #[test]
    fn reordering_timer_skips_dropped_block() {
        let mut q = ReorderingQueue::new(SimTime::from_millis(100));
        q.receive(0, 0u8, SimTime::ZERO);
        let (_, timer) = q.receive(2, 2, SimTime::from_millis(4));
        let t = timer.unwrap();
        assert_eq!(t.deadline, SimTime::from_millis(104));
        let (out, _) = q.receive(3, 3, SimTime::from_millis(6));
        assert!(out.is_empty());
        let (out, next) = q.expire(t.generation, t.deadline);
        assert_eq!(out, vec![2, 3]);
        assert!(next.is_none());
        assert_eq!(q.skipped_tsns, 1);
        // the dropped block arriving late is ignored
        let (out, _) = q.receive(1, 1, SimTime::from_millis(200));
        assert!(out.is_empty());
        assert_eq!(q.late_blocks, 1);
    }

    #[test]
    fn stale_timer_generation_ignored() {
        let mut q = ReorderingQueue::new(SimTime::from_millis(100));
        let (_, t) = q.receive(1, (), SimTime::ZERO);
        q.receive(0, (), SimTime::from_millis(1));
        let (out, _) = q.expire(t.unwrap().generation, SimTime::from_millis(100));
        assert!(out.is_empty());
    }
}
