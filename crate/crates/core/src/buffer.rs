//! MAC-hs per-UE buffer management.
//!
//! One logical queue per multimedia UE holds two FIFOs, one per flow class.
//! Three disciplines share the structure:
//!
//! * **CBS** (complete buffer sharing): drop-tail on the total occupancy and
//!   service in arrival order across both classes.
//! * **s-TSP** (static time-space priority): RT occupancy is capped at `R`,
//!   NRT may use the whole buffer, and RT is always served first.
//! * **D-TSP**: s-TSP admission, but a scheduling opportunity is handed to
//!   NRT while fewer than `delta` RT PDUs are queued and the RT head-of-line
//!   delay is still inside the budget.
//!
//! Under both TSP variants a discard timer drops RT PDUs that have waited
//! `DT` in the buffer.

use std::collections::VecDeque;

use thiserror::Error;

use crate::engine::SimTime;

/// MAC-d PDU size in bits.
pub const PDU_SIZE_BITS: u32 = 320;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FlowClass {
    Rt,
    Nrt,
}

impl FlowClass {
    pub fn index(self) -> usize {
        match self {
            FlowClass::Rt => 0,
            FlowClass::Nrt => 1,
        }
    }
}

/// The unit of queuing and accounting between RLC and MAC-hs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MacdPdu {
    pub flow: FlowClass,
    pub rlc_seq: u64,
    pub size_bits: u32,
    /// Upper-layer SDU this PDU carries a segment of.
    pub sdu_id: u64,
    pub last_in_sdu: bool,
    /// Emission time at the traffic source.
    pub created_at: SimTime,
    /// Set when the PDU enters the Node-B buffer.
    pub machs_arrival: Option<SimTime>,
}

impl MacdPdu {
    pub fn new(flow: FlowClass, rlc_seq: u64, created_at: SimTime) -> Self {
        Self {
            flow,
            rlc_seq,
            size_bits: PDU_SIZE_BITS,
            sdu_id: rlc_seq,
            last_in_sdu: true,
            created_at,
            machs_arrival: None,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum BufferConfigError {
    #[error("buffer thresholds must satisfy 0 < R < L < H < N (got R={r}, L={l}, H={h}, N={n})")]
    ThresholdOrder { r: u32, l: u32, h: u32, n: u32 },
    #[error("delay budget {db_ms} ms exceeds DB_max {db_max_ms} ms")]
    BudgetAboveMax { db_ms: f64, db_max_ms: f64 },
    #[error("switching threshold delta={delta} exceeds R={r}")]
    DeltaAboveR { delta: u32, r: u32 },
}

/// Thresholds in PDUs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BufferConfig {
    pub n: u32,
    pub r: u32,
    pub l: u32,
    pub h: u32,
}

impl Default for BufferConfig {
    fn default() -> Self {
        Self {
            n: 192,
            r: 32,
            l: 72,
            h: 144,
        }
    }
}

impl BufferConfig {
    pub fn validate(&self) -> Result<(), BufferConfigError> {
        if 0 < self.r && self.r < self.l && self.l < self.h && self.h < self.n {
            Ok(())
        } else {
            Err(BufferConfigError::ThresholdOrder {
                r: self.r,
                l: self.l,
                h: self.h,
                n: self.n,
            })
        }
    }
}

/// RT inter-arrival time at the buffer for a CBR flow: `pdu_size / gbr`.
pub fn rt_interarrival(pdu_bits: u32, lambda_rt_bps: u64) -> SimTime {
    SimTime::from_micros(u64::from(pdu_bits) * 1_000_000 / lambda_rt_bps)
}

/// Switching threshold `delta = DB / i`, in whole PDUs.
pub fn switching_threshold(db: SimTime, pdu_bits: u32, lambda_rt_bps: u64) -> u32 {
    (db.as_micros() * lambda_rt_bps / (u64::from(pdu_bits) * 1_000_000)) as u32
}

/// Maximum MAC-hs budget: end-to-end downlink limit minus fixed path delays.
pub fn max_delay_budget(max_downlink_delay: SimTime, fixed_delays: SimTime) -> SimTime {
    max_downlink_delay - fixed_delays
}

/// RT threshold in PDUs: `gbr * DB_max / pdu_size`.
pub fn rt_threshold(lambda_rt_bps: u64, db_max: SimTime, pdu_bits: u32) -> u32 {
    (lambda_rt_bps * db_max.as_micros() / (u64::from(pdu_bits) * 1_000_000)) as u32
}

/// Buffer dimensioning: `R` from the RT budget plus NRT space from its peak
/// rate over its delay budget; `H = 0.75 N`, `L = 0.5 H`.
pub fn dimension_buffer(
    lambda_rt_bps: u64,
    db_max: SimTime,
    nrt_max_bitrate_bps: u64,
    nrt_delay_budget: SimTime,
    pdu_bits: u32,
) -> BufferConfig {
    let r = rt_threshold(lambda_rt_bps, db_max, pdu_bits);
    let nrt_space =
        (nrt_max_bitrate_bps * nrt_delay_budget.as_micros() / (u64::from(pdu_bits) * 1_000_000)) as u32;
    let n = r + nrt_space;
    let h = n * 3 / 4;
    BufferConfig { n, r, l: h / 2, h }
}

/// Which delay the D-TSP head-of-line test compares against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HolBudget {
    /// The pseudocode reading: `RT HOL delay < DB_max`.
    DbMax,
    /// The prose reading: the configured budget `DB`.
    Db,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PriorityConfig {
    pub db: SimTime,
    pub db_max: SimTime,
    pub discard_timeout: SimTime,
    pub delta: u32,
    pub hol_budget: HolBudget,
}

impl PriorityConfig {
    pub fn new(
        db: SimTime,
        db_max: SimTime,
        discard_timeout: SimTime,
        pdu_bits: u32,
        lambda_rt_bps: u64,
    ) -> Self {
        Self {
            db,
            db_max,
            discard_timeout,
            delta: switching_threshold(db, pdu_bits, lambda_rt_bps),
            hol_budget: HolBudget::DbMax,
        }
    }

    pub fn validate(&self, buffer: &BufferConfig) -> Result<(), BufferConfigError> {
        if self.db > self.db_max {
            return Err(BufferConfigError::BudgetAboveMax {
                db_ms: self.db.as_micros() as f64 / 1e3,
                db_max_ms: self.db_max.as_micros() as f64 / 1e3,
            });
        }
        if self.delta > buffer.r {
            return Err(BufferConfigError::DeltaAboveR {
                delta: self.delta,
                r: buffer.r,
            });
        }
        Ok(())
    }

    fn hol_limit(&self) -> SimTime {
        match self.hol_budget {
            HolBudget::DbMax => self.db_max,
            HolBudget::Db => self.db,
        }
    }
}

impl Default for PriorityConfig {
    fn default() -> Self {
        let db_max = SimTime::from_millis(160);
        Self::new(db_max, db_max, db_max, PDU_SIZE_BITS, 64_000)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Cbs,
    StaticTsp,
    DynamicTsp,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Cbs => "cbs",
            Scheme::StaticTsp => "stsp",
            Scheme::DynamicTsp => "dtsp",
        }
    }

    pub fn parse(s: &str) -> Option<Scheme> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cbs" => Some(Scheme::Cbs),
            "stsp" | "s-tsp" => Some(Scheme::StaticTsp),
            "dtsp" | "d-tsp" => Some(Scheme::DynamicTsp),
            _ => None,
        }
    }

    pub fn is_tsp(self) -> bool {
        !matches!(self, Scheme::Cbs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Admitted,
    Dropped,
}

/// Flow chosen to supply the next transport block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    Rt,
    Nrt,
    Empty,
}

impl Selection {
    pub fn flow(self) -> Option<FlowClass> {
        match self {
            Selection::Rt => Some(FlowClass::Rt),
            Selection::Nrt => Some(FlowClass::Nrt),
            Selection::Empty => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BufferCounters {
    pub rt_arrivals: u64,
    pub nrt_arrivals: u64,
    pub rt_admitted: u64,
    pub nrt_admitted: u64,
    pub rt_admission_drops: u64,
    pub nrt_admission_drops: u64,
    pub rt_dt_discards: u64,
    pub rt_dequeued: u64,
    pub nrt_dequeued: u64,
}

#[derive(Debug, Clone)]
struct Queued {
    // arrival order across both classes
    stamp: u64,
    pdu: MacdPdu,
}

#[derive(Debug, Clone)]
pub struct TspBuffer {
    scheme: Scheme,
    cfg: BufferConfig,
    prio: PriorityConfig,
    rt: VecDeque<Queued>,
    nrt: VecDeque<Queued>,
    next_stamp: u64,
    counters: BufferCounters,
}

impl TspBuffer {
    pub fn new(scheme: Scheme, cfg: BufferConfig, prio: PriorityConfig) -> Self {
        Self {
            scheme,
            cfg,
            prio,
            rt: VecDeque::with_capacity(cfg.r as usize + 1),
            nrt: VecDeque::with_capacity(cfg.n as usize + 1),
            next_stamp: 0,
            counters: BufferCounters::default(),
        }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn config(&self) -> &BufferConfig {
        &self.cfg
    }

    pub fn priority(&self) -> &PriorityConfig {
        &self.prio
    }

    /// RT PDUs resident.
    pub fn r(&self) -> u32 {
        self.rt.len() as u32
    }

    /// NRT PDUs resident.
    pub fn n(&self) -> u32 {
        self.nrt.len() as u32
    }

    /// Total occupancy `q = r + n`.
    pub fn occupancy(&self) -> u32 {
        self.r() + self.n()
    }

    pub fn is_empty(&self) -> bool {
        self.rt.is_empty() && self.nrt.is_empty()
    }

    pub fn counters(&self) -> &BufferCounters {
        &self.counters
    }

    /// Resident PDUs of one class, head first.
    pub fn iter_class(&self, flow: FlowClass) -> impl Iterator<Item = &MacdPdu> {
        match flow {
            FlowClass::Rt => self.rt.iter(),
            FlowClass::Nrt => self.nrt.iter(),
        }
        .map(|q| &q.pdu)
    }

    /// Admission under whichever discipline the buffer runs.
    pub fn admit(&mut self, pdu: MacdPdu, now: SimTime) -> Admission {
        match self.scheme {
            Scheme::Cbs => self.admit_cbs(pdu, now),
            Scheme::StaticTsp | Scheme::DynamicTsp => self.admit_tsp(pdu, now),
        }
    }

    /// TSP admission: RT joins its tail while `r < R`; NRT joins while
    /// `r + n < N`. RT also needs a free slot so that `r + n <= N` holds.
    pub fn admit_tsp(&mut self, pdu: MacdPdu, now: SimTime) -> Admission {
        debug_assert!(self.scheme.is_tsp());
        let (r, q) = (self.r(), self.occupancy());
        let ok = match pdu.flow {
            FlowClass::Rt => r < self.cfg.r && q < self.cfg.n,
            FlowClass::Nrt => q < self.cfg.n,
        };
        self.finish_admission(pdu, now, ok)
    }

    /// Drop-tail on total occupancy, regardless of class.
    pub fn admit_cbs(&mut self, pdu: MacdPdu, now: SimTime) -> Admission {
        debug_assert_eq!(self.scheme, Scheme::Cbs);
        let ok = self.occupancy() < self.cfg.n;
        self.finish_admission(pdu, now, ok)
    }

    fn finish_admission(&mut self, mut pdu: MacdPdu, now: SimTime, ok: bool) -> Admission {
        let c = &mut self.counters;
        match pdu.flow {
            FlowClass::Rt => c.rt_arrivals += 1,
            FlowClass::Nrt => c.nrt_arrivals += 1,
        }
        if !ok {
            match pdu.flow {
                FlowClass::Rt => c.rt_admission_drops += 1,
                FlowClass::Nrt => c.nrt_admission_drops += 1,
            }
            return Admission::Dropped;
        }
        match pdu.flow {
            FlowClass::Rt => c.rt_admitted += 1,
            FlowClass::Nrt => c.nrt_admitted += 1,
        }
        pdu.machs_arrival = Some(now);
        let q = Queued {
            stamp: self.next_stamp,
            pdu,
        };
        self.next_stamp += 1;
        match q.pdu.flow {
            FlowClass::Rt => self.rt.push_back(q),
            FlowClass::Nrt => self.nrt.push_back(q),
        }
        Admission::Admitted
    }

    /// Time the RT head-of-line PDU has spent in the buffer; zero if none.
    pub fn rt_hol_delay(&self, now: SimTime) -> SimTime {
        self.rt
            .front()
            .and_then(|q| q.pdu.machs_arrival)
            .map_or(SimTime::ZERO, |a| now.saturating_sub(a))
    }

    /// Picks the class that supplies this scheduling opportunity.
    pub fn select_flow(&self, now: SimTime) -> Selection {
        let (r, n) = (self.r(), self.n());
        match self.scheme {
            Scheme::Cbs => match (self.rt.front(), self.nrt.front()) {
                (None, None) => Selection::Empty,
                (Some(_), None) => Selection::Rt,
                (None, Some(_)) => Selection::Nrt,
                (Some(a), Some(b)) => {
                    if a.stamp < b.stamp {
                        Selection::Rt
                    } else {
                        Selection::Nrt
                    }
                }
            },
            Scheme::StaticTsp => Self::rt_first(r, n),
            Scheme::DynamicTsp => {
                if r < self.prio.delta && self.rt_hol_delay(now) < self.prio.hol_limit() && n > 0 {
                    Selection::Nrt
                } else {
                    // with r == 0 the RT branch would be empty; serve NRT
                    Self::rt_first(r, n)
                }
            }
        }
    }

    fn rt_first(r: u32, n: u32) -> Selection {
        if r > 0 {
            Selection::Rt
        } else if n > 0 {
            Selection::Nrt
        } else {
            Selection::Empty
        }
    }

    /// Removes up to `max_bits / 320` PDUs from the head of `flow`.
    ///
    /// Under CBS the block stops where the shared FIFO switches class, so
    /// departures stay in arrival order and a block is never mixed.
    pub fn dequeue_for_tti(&mut self, flow: FlowClass, max_bits: u32) -> Vec<MacdPdu> {
        let budget = (max_bits / PDU_SIZE_BITS) as usize;
        let (own, other) = match flow {
            FlowClass::Rt => (&mut self.rt, &self.nrt),
            FlowClass::Nrt => (&mut self.nrt, &self.rt),
        };
        let limit_stamp = match self.scheme {
            Scheme::Cbs => other.front().map_or(u64::MAX, |q| q.stamp),
            _ => u64::MAX,
        };
        let mut out = Vec::with_capacity(budget.min(own.len()));
        while out.len() < budget {
            match own.front() {
                Some(q) if q.stamp < limit_stamp => {
                    out.push(own.pop_front().expect("front exists").pdu);
                }
                _ => break,
            }
        }
        match flow {
            FlowClass::Rt => self.counters.rt_dequeued += out.len() as u64,
            FlowClass::Nrt => self.counters.nrt_dequeued += out.len() as u64,
        }
        out
    }

    /// Drops RT head-of-line PDUs whose buffer wait has reached `DT`.
    /// No-op under CBS, which has no discard timer.
    pub fn discard_timer_sweep(&mut self, now: SimTime) -> Vec<MacdPdu> {
        let mut dropped = Vec::new();
        if !self.scheme.is_tsp() {
            return dropped;
        }
        while let Some(q) = self.rt.front() {
            let arrived = q.pdu.machs_arrival.expect("resident PDUs are stamped");
            if now.saturating_sub(arrived) >= self.prio.discard_timeout {
                dropped.push(self.rt.pop_front().expect("front exists").pdu);
            } else {
                break;
            }
        }
        self.counters.rt_dt_discards += dropped.len() as u64;
        dropped
    }

    /// Per-class ledger: arrivals = admitted + drops, and
    /// admitted = dequeued + discarded + resident.
    pub fn ledger_balanced(&self) -> bool {
        let c = &self.counters;
        c.rt_arrivals == c.rt_admitted + c.rt_admission_drops
            && c.nrt_arrivals == c.nrt_admitted + c.nrt_admission_drops
            && c.rt_admitted == c.rt_dequeued + c.rt_dt_discards + self.rt.len() as u64
            && c.nrt_admitted == c.nrt_dequeued + self.nrt.len() as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ms(v: u64) -> SimTime {
        SimTime::from_millis(v)
    }

    fn rt(seq: u64) -> MacdPdu {
        MacdPdu::new(FlowClass::Rt, seq, SimTime::ZERO)
    }

    fn nrt(seq: u64) -> MacdPdu {
        MacdPdu::new(FlowClass::Nrt, seq, SimTime::ZERO)
    }

    fn dtsp(db_ms: u64) -> TspBuffer {
        let prio = PriorityConfig::new(ms(db_ms), ms(160), ms(160), PDU_SIZE_BITS, 64_000);
        TspBuffer::new(Scheme::DynamicTsp, BufferConfig::default(), prio)
    }

    fn fill(b: &mut TspBuffer, rts: u64, nrts: u64, at: SimTime) {
        for i in 0..rts {
            assert_eq!(b.admit(rt(i), at), Admission::Admitted);
        }
        for i in 0..nrts {
            assert_eq!(b.admit(nrt(i), at), Admission::Admitted);
        }
    }

    #[test]
    fn formula_values() {
        assert_eq!(rt_interarrival(320, 64_000), ms(5));
        let deltas: Vec<u32> = [40, 80, 120, 160]
            .iter()
            .map(|d| switching_threshold(ms(*d), 320, 64_000))
            .collect();
        assert_eq!(deltas, vec![8, 16, 24, 32]);
        assert_eq!(max_delay_budget(ms(250), ms(70 + 20)), ms(160));
        assert_eq!(rt_threshold(64_000, ms(160), 320), 32);
        assert_eq!(
            dimension_buffer(64_000, ms(160), 256_000, ms(200), 320),
            BufferConfig::default()
        );
    }

    #[test]
    fn threshold_order_validation() {
        assert!(BufferConfig::default().validate().is_ok());
        let bad = BufferConfig {
            l: 200,
            ..BufferConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = BufferConfig {
            r: 0,
            ..BufferConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn tsp_admission() {
        let mut b = dtsp(80);
        assert_eq!(b.admit(rt(0), ms(1)), Admission::Admitted);
        assert_eq!(b.r(), 1);
        assert_eq!(b.iter_class(FlowClass::Rt).next().unwrap().machs_arrival, Some(ms(1)));

        let mut b = dtsp(80);
        fill(&mut b, 32, 0, ms(0));
        assert_eq!(b.admit(rt(99), ms(0)), Admission::Dropped);
        assert_eq!(b.counters().rt_admission_drops, 1);

        let mut b = dtsp(80);
        fill(&mut b, 10, 182, ms(0));
        assert_eq!(b.admit(nrt(999), ms(0)), Admission::Dropped);
        assert_eq!(b.counters().nrt_admission_drops, 1);
        assert!(b.ledger_balanced());
    }

    #[test]
    fn cbs_drop_tail_and_order() {
        let mut b = TspBuffer::new(Scheme::Cbs, BufferConfig::default(), PriorityConfig::default());
        fill(&mut b, 0, 191, ms(0));
        assert_eq!(b.admit(nrt(500), ms(0)), Admission::Admitted);
        assert_eq!(b.admit(rt(0), ms(0)), Admission::Dropped);
        assert_eq!(b.occupancy(), 192);

        let mut b = TspBuffer::new(Scheme::Cbs, BufferConfig::default(), PriorityConfig::default());
        // R R N N N R
        for p in [rt(0), rt(1), nrt(0), nrt(1), nrt(2), rt(2)] {
            b.admit(p, ms(0));
        }
        assert_eq!(b.select_flow(ms(0)), Selection::Rt);
        let blk = b.dequeue_for_tti(FlowClass::Rt, 10 * 320);
        assert_eq!(blk.len(), 2, "stops where the shared FIFO switches class");
        assert_eq!(b.select_flow(ms(0)), Selection::Nrt);
        assert_eq!(b.dequeue_for_tti(FlowClass::Nrt, 10 * 320).len(), 3);
        assert_eq!(b.select_flow(ms(0)), Selection::Rt);
        assert_eq!(b.discard_timer_sweep(ms(10_000)).len(), 0, "CBS has no DT");
    }

    #[test]
    fn dtsp_switching() {
        let mut b = dtsp(80);
        assert_eq!(b.priority().delta, 16);
        fill(&mut b, 10, 5, ms(0));
        assert_eq!(b.select_flow(ms(50)), Selection::Nrt);

        let mut b = dtsp(80);
        fill(&mut b, 3, 0, ms(0));
        assert_eq!(b.select_flow(ms(1)), Selection::Rt);

        let mut b = dtsp(80);
        fill(&mut b, 16, 5, ms(0));
        assert_eq!(b.select_flow(ms(1)), Selection::Rt, "r == delta");

        let mut b = dtsp(80);
        fill(&mut b, 0, 4, ms(0));
        assert_eq!(b.select_flow(ms(1)), Selection::Nrt);
        let empty = dtsp(80);
        assert_eq!(empty.select_flow(ms(1)), Selection::Empty);
    }

    #[test]
    fn dtsp_never_favors_nrt_past_budget() {
        let mut b = dtsp(160);
        fill(&mut b, 2, 5, ms(0));
        assert_eq!(b.select_flow(ms(159)), Selection::Nrt);
        assert_eq!(b.select_flow(ms(160)), Selection::Rt);
    }

    #[test]
    fn hol_budget_prose_reading() {
        let mut b = dtsp(40);
        b.prio.hol_budget = HolBudget::Db;
        fill(&mut b, 2, 5, ms(0));
        assert_eq!(b.select_flow(ms(39)), Selection::Nrt);
        assert_eq!(b.select_flow(ms(40)), Selection::Rt);
    }

    #[test]
    fn static_tsp_always_rt_first() {
        let prio = PriorityConfig::default();
        let mut b = TspBuffer::new(Scheme::StaticTsp, BufferConfig::default(), prio);
        fill(&mut b, 1, 100, ms(0));
        assert_eq!(b.select_flow(ms(1)), Selection::Rt);
    }

    #[test]
    fn dequeue_counts() {
        let mut b = dtsp(80);
        fill(&mut b, 10, 2, ms(0));
        let blk = b.dequeue_for_tti(FlowClass::Rt, 2379);
        assert_eq!(blk.len(), 7);
        assert_eq!(b.r(), 3);
        assert!(blk.iter().all(|p| p.flow == FlowClass::Rt));
        assert!(b.dequeue_for_tti(FlowClass::Rt, 0).is_empty());
        assert_eq!(b.r(), 3);
        assert_eq!(b.dequeue_for_tti(FlowClass::Nrt, 7 * 320).len(), 2);
        assert!(b.ledger_balanced());
    }

    #[test]
    fn discard_timer_boundary() {
        let mut b = dtsp(80);
        b.admit(rt(0), SimTime::ZERO);
        assert!(b
            .discard_timer_sweep(SimTime::from_micros(159_999))
            .is_empty());
        assert_eq!(b.discard_timer_sweep(ms(160)).len(), 1);
        assert_eq!(b.counters().rt_dt_discards, 1);

        let mut b = dtsp(80);
        for i in 0..5 {
            b.admit(rt(i), ms(i));
        }
        b.admit(rt(5), ms(100));
        b.admit(nrt(0), ms(0));
        let gone = b.discard_timer_sweep(ms(164));
        assert_eq!(gone.len(), 5);
        assert_eq!(b.r(), 1);
        assert_eq!(b.n(), 1, "NRT is never timed out");
        assert!(b.ledger_balanced());
    }

    #[test]
    fn hol_delay() {
        let mut b = dtsp(80);
        assert_eq!(b.rt_hol_delay(ms(5)), SimTime::ZERO);
        b.admit(rt(0), ms(5));
        assert_eq!(b.rt_hol_delay(ms(5)), SimTime::ZERO);
        assert_eq!(b.rt_hol_delay(ms(42)), ms(37));
    }
}
