//! RLC segmentation and the two transfer modes used here: acknowledged mode
//! (ARQ, in-sequence delivery) for NRT and unacknowledged mode for RT.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use crate::buffer::{FlowClass, MacdPdu, PDU_SIZE_BITS};
use crate::engine::SimTime;

#[derive(Debug, Clone, PartialEq)]
pub struct RlcConfig {
    pub pdu_size_bits: u32,
    pub tx_window: u64,
    pub rx_window: u64,
    /// Transmission attempts per PDU before its SDU is discarded.
    pub max_dat: u32,
    /// Minimum spacing between successive transmissions of one PDU.
    pub retransmission_delay: SimTime,
    /// Status reports carry at most this many NACKs.
    pub max_status_nacks: usize,
}

impl Default for RlcConfig {
    fn default() -> Self {
        Self {
            pdu_size_bits: PDU_SIZE_BITS,
            tx_window: 1024,
            rx_window: 1024,
            max_dat: 6,
            retransmission_delay: SimTime::from_millis(200),
            max_status_nacks: 32,
        }
    }
}

impl RlcConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_dat == 0 {
            return Err("rlc.max_dat must be >= 1".into());
        }
        if self.tx_window == 0 || self.rx_window == 0 {
            return Err("RLC windows must be positive".into());
        }
        if self.pdu_size_bits != PDU_SIZE_BITS {
            return Err(format!("rlc.pdu_bits is fixed at {PDU_SIZE_BITS}"));
        }
        Ok(())
    }
}

/// Number of PDUs for an SDU: `ceil(bits / 320)`.
pub fn pdu_count(sdu_bits: u32) -> u32 {
    sdu_bits.div_ceil(PDU_SIZE_BITS)
}

/// Padding in the last PDU of an SDU.
pub fn padding_bits(sdu_bits: u32) -> u32 {
    pdu_count(sdu_bits) * PDU_SIZE_BITS - sdu_bits
}

/// Splits an SDU into consecutive PDUs starting at `first_seq`.
pub fn segment(
    flow: FlowClass,
    sdu_id: u64,
    sdu_bits: u32,
    first_seq: u64,
    created_at: SimTime,
) -> Vec<MacdPdu> {
    assert!(sdu_bits > 0, "empty SDU");
    let count = u64::from(pdu_count(sdu_bits));
    (0..count)
        .map(|i| MacdPdu {
            flow,
            rlc_seq: first_seq + i,
            size_bits: PDU_SIZE_BITS,
            sdu_id,
            last_in_sdu: i + 1 == count,
            created_at,
            machs_arrival: None,
        })
        .collect()
}

/// A reassembled SDU handed to the upper layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeliveredSdu {
    pub sdu_id: u64,
    pub created_at: SimTime,
    pub pdus: u32,
}

fn reassemble(partial: &mut Vec<MacdPdu>, pdu: MacdPdu, out: &mut Vec<DeliveredSdu>) {
    if partial.first().is_some_and(|p| p.sdu_id != pdu.sdu_id) {
        partial.clear();
    }
    let last = pdu.last_in_sdu;
    partial.push(pdu);
    if last {
        let first = &partial[0];
        out.push(DeliveredSdu {
            sdu_id: first.sdu_id,
            created_at: first.created_at,
            pdus: partial.len() as u32,
        });
        partial.clear();
    }
}

// ---------------------------------------------------------------------------
// Unacknowledged mode

#[derive(Debug, Clone, Default)]
pub struct UmSender {
    next_seq: u64,
}

impl UmSender {
    pub fn send(&mut self, sdu_id: u64, sdu_bits: u32, created_at: SimTime) -> Vec<MacdPdu> {
        let pdus = segment(FlowClass::Rt, sdu_id, sdu_bits, self.next_seq, created_at);
        self.next_seq += pdus.len() as u64;
        pdus
    }
}

#[derive(Debug, Clone, Default)]
pub struct UmReceiver {
    expected: u64,
    partial: Vec<MacdPdu>,
    /// PDUs skipped over at sequence gaps.
    pub gap_pdus: u64,
    /// SDUs lost because a gap cut them.
    pub lost_sdus: u64,
    pub late_pdus: u64,
}

impl UmReceiver {
    /// In-sequence receive; gaps are skipped and any partial SDU is dropped.
    pub fn receive(&mut self, pdu: MacdPdu) -> Vec<DeliveredSdu> {
        let mut out = Vec::new();
        if pdu.rlc_seq < self.expected {
            self.late_pdus += 1;
            return out;
        }
        if pdu.rlc_seq > self.expected {
            self.gap_pdus += pdu.rlc_seq - self.expected;
            if !self.partial.is_empty() {
                self.partial.clear();
                self.lost_sdus += 1;
            }
        }
        self.expected = pdu.rlc_seq + 1;
        reassemble(&mut self.partial, pdu, &mut out);
        out
    }
}

// ---------------------------------------------------------------------------
// Acknowledged mode

/// Receiver state report: every sequence in `[vr_r, covered_to]` that is not
/// listed in `missing` has been received, as has everything below `vr_r`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatusReport {
    pub vr_r: u64,
    pub covered_to: Option<u64>,
    pub missing: Vec<u64>,
}

/// Tells the receiver an SDU was abandoned so it can move its window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscardNotice {
    pub sdu_id: u64,
    pub first_seq: u64,
    pub last_seq: u64,
}

#[derive(Debug, Clone)]
struct Outstanding {
    pdu: MacdPdu,
    transmissions: u32,
    last_tx: Option<SimTime>,
    queued: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StatusOutcome {
    pub retransmit: Vec<MacdPdu>,
    pub discarded: Vec<DiscardNotice>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AmSenderStats {
    pub pdus_created: u64,
    pub transmissions: u64,
    pub retransmissions: u64,
    pub sdus_discarded: u64,
}

#[derive(Debug, Clone)]
pub struct AmSender {
    cfg: RlcConfig,
    next_seq: u64,
    /// Next sequence to enter the RNC queue (`VT(S)`).
    vt_s: u64,
    waiting: VecDeque<MacdPdu>,
    outstanding: BTreeMap<u64, Outstanding>,
    sdu_ranges: HashMap<u64, (u64, u64)>,
    stats: AmSenderStats,
}

impl AmSender {
    pub fn new(cfg: RlcConfig) -> Self {
        Self {
            cfg,
            next_seq: 0,
            vt_s: 0,
            waiting: VecDeque::new(),
            outstanding: BTreeMap::new(),
            sdu_ranges: HashMap::new(),
            stats: AmSenderStats::default(),
        }
    }

    /// Lowest unacknowledged sequence (`VT(A)`).
    pub fn vt_a(&self) -> u64 {
        self.outstanding.keys().next().copied().unwrap_or(self.vt_s)
    }

    pub fn vt_s(&self) -> u64 {
        self.vt_s
    }

    pub fn in_flight(&self) -> u64 {
        self.vt_s - self.vt_a()
    }

    pub fn window_stalled(&self) -> bool {
        !self.waiting.is_empty() && self.in_flight() >= self.cfg.tx_window
    }

    pub fn stats(&self) -> AmSenderStats {
        self.stats
    }

    pub fn transmissions_of(&self, seq: u64) -> Option<u32> {
        self.outstanding.get(&seq).map(|o| o.transmissions)
    }

    /// Segments an SDU and returns the PDUs the window lets through now.
    pub fn submit_sdu(&mut self, sdu_id: u64, sdu_bits: u32, created_at: SimTime) -> Vec<MacdPdu> {
        let pdus = segment(FlowClass::Nrt, sdu_id, sdu_bits, self.next_seq, created_at);
        let first = self.next_seq;
        self.next_seq += pdus.len() as u64;
        self.sdu_ranges.insert(sdu_id, (first, self.next_seq - 1));
        self.stats.pdus_created += pdus.len() as u64;
        self.waiting.extend(pdus);
        self.pull_window()
    }

    fn pull_window(&mut self) -> Vec<MacdPdu> {
        let mut out = Vec::new();
        while let Some(p) = self.waiting.front() {
            if p.rlc_seq >= self.vt_a() + self.cfg.tx_window {
                break;
            }
            let p = self.waiting.pop_front().expect("front exists");
            self.vt_s = p.rlc_seq + 1;
            self.outstanding.insert(
                p.rlc_seq,
                Outstanding {
                    pdu: p.clone(),
                    transmissions: 0,
                    last_tx: None,
                    queued: true,
                },
            );
            out.push(p);
        }
        out
    }

    /// Called when the RNC ships the PDU toward the Node B.
    pub fn on_shipped(&mut self, seq: u64, now: SimTime) {
        if let Some(o) = self.outstanding.get_mut(&seq) {
            o.transmissions += 1;
            o.last_tx = Some(now);
            o.queued = false;
            self.stats.transmissions += 1;
            if o.transmissions > 1 {
                self.stats.retransmissions += 1;
            }
        }
    }

    /// Processes a status report. Returns PDUs to queue for retransmission,
    /// SDUs abandoned after `max_dat` attempts, and fresh PDUs released by the
    /// window opening (appended to `retransmit` after the retransmissions).
    pub fn on_status(&mut self, report: &StatusReport, now: SimTime) -> (StatusOutcome, Vec<MacdPdu>) {
        let acked_below: Vec<u64> = self.outstanding.range(..report.vr_r).map(|(s, _)| *s).collect();
        for s in acked_below {
            self.outstanding.remove(&s);
        }
        if let Some(top) = report.covered_to {
            let missing: BTreeSet<u64> = report.missing.iter().copied().collect();
            let acked: Vec<u64> = self
                .outstanding
                .range(report.vr_r..=top)
                .map(|(s, _)| *s)
                .filter(|s| !missing.contains(s))
                .collect();
            for s in acked {
                self.outstanding.remove(&s);
            }
        }

        let mut outcome = StatusOutcome::default();
        let mut abandon: Vec<u64> = Vec::new();
        for seq in &report.missing {
            let Some(o) = self.outstanding.get_mut(seq) else {
                continue;
            };
            let Some(last) = o.last_tx else { continue };
            if o.queued || now.saturating_sub(last) < self.cfg.retransmission_delay {
                continue;
            }
            if o.transmissions >= self.cfg.max_dat {
                if !abandon.contains(&o.pdu.sdu_id) {
                    abandon.push(o.pdu.sdu_id);
                }
                continue;
            }
            o.queued = true;
            outcome.retransmit.push(o.pdu.clone());
        }
        for sdu in abandon {
            if let Some(notice) = self.discard_sdu(sdu) {
                outcome.discarded.push(notice);
            }
        }
        let fresh = self.pull_window();
        (outcome, fresh)
    }

    fn discard_sdu(&mut self, sdu_id: u64) -> Option<DiscardNotice> {
        let (first, last) = self.sdu_ranges.remove(&sdu_id)?;
        for s in first..=last {
            self.outstanding.remove(&s);
        }
        self.waiting.retain(|p| p.sdu_id != sdu_id);
        self.stats.sdus_discarded += 1;
        Some(DiscardNotice {
            sdu_id,
            first_seq: first,
            last_seq: last,
        })
    }

    /// Forgets bookkeeping for SDUs fully below `VT(A)`.
    pub fn prune_acked_sdus(&mut self) {
        let vt_a = self.vt_a();
        self.sdu_ranges.retain(|_, (_, last)| *last >= vt_a);
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AmReceiverStats {
    pub received: u64,
    pub duplicates: u64,
    pub out_of_window: u64,
    pub sdus_delivered: u64,
    pub sdus_skipped: u64,
}

#[derive(Debug, Clone)]
pub struct AmReceiver {
    cfg: RlcConfig,
    /// Next in-sequence PDU expected (`VR(R)`).
    vr_r: u64,
    highest: Option<u64>,
    buffer: BTreeMap<u64, MacdPdu>,
    skipped: BTreeMap<u64, u64>,
    partial: Vec<MacdPdu>,
    stats: AmReceiverStats,
}

impl AmReceiver {
    pub fn new(cfg: RlcConfig) -> Self {
        Self {
            cfg,
            vr_r: 0,
            highest: None,
            buffer: BTreeMap::new(),
            skipped: BTreeMap::new(),
            partial: Vec::new(),
            stats: AmReceiverStats::default(),
        }
    }

    pub fn vr_r(&self) -> u64 {
        self.vr_r
    }

    pub fn stats(&self) -> AmReceiverStats {
        self.stats
    }

    /// Accepts one PDU; returns in-sequence SDUs now complete and the status
    /// report this PDU's poll triggers.
    pub fn receive(&mut self, pdu: MacdPdu) -> (Vec<DeliveredSdu>, StatusReport) {
        self.stats.received += 1;
        let seq = pdu.rlc_seq;
        if seq < self.vr_r || self.buffer.contains_key(&seq) || self.skipped.contains_key(&seq) {
            self.stats.duplicates += 1;
        } else if seq >= self.vr_r + self.cfg.rx_window {
            self.stats.out_of_window += 1;
        } else {
            self.highest = Some(self.highest.map_or(seq, |h| h.max(seq)));
            self.buffer.insert(seq, pdu);
        }
        let delivered = self.advance();
        (delivered, self.status())
    }

    /// Applies a sender discard: the SDU's sequences are skipped.
    pub fn apply_discard(&mut self, notice: &DiscardNotice) -> Vec<DeliveredSdu> {
        for s in notice.first_seq.max(self.vr_r)..=notice.last_seq {
            self.buffer.remove(&s);
            self.skipped.insert(s, notice.sdu_id);
        }
        if notice.last_seq >= self.vr_r {
            self.highest = Some(self.highest.map_or(notice.last_seq, |h| h.max(notice.last_seq)));
        }
        if self.partial.first().is_some_and(|p| p.sdu_id == notice.sdu_id) {
            self.partial.clear();
        }
        self.stats.sdus_skipped += 1;
        self.advance()
    }

    fn advance(&mut self) -> Vec<DeliveredSdu> {
        let mut out = Vec::new();
        loop {
            if let Some(sdu) = self.skipped.remove(&self.vr_r) {
                if self.partial.first().is_some_and(|p| p.sdu_id == sdu) {
                    self.partial.clear();
                }
                self.vr_r += 1;
            } else if let Some(p) = self.buffer.remove(&self.vr_r) {
                self.vr_r += 1;
                reassemble(&mut self.partial, p, &mut out);
            } else {
                break;
            }
        }
        self.stats.sdus_delivered += out.len() as u64;
        out
    }

    pub fn status(&self) -> StatusReport {
        let Some(highest) = self.highest.filter(|h| *h >= self.vr_r) else {
            return StatusReport {
                vr_r: self.vr_r,
                covered_to: None,
                missing: Vec::new(),
            };
        };
        let mut missing = Vec::new();
        let mut expect = self.vr_r;
        let mut covered = self.vr_r;
        let present = self
            .buffer
            .keys()
            .copied()
            .chain(self.skipped.keys().copied().filter(|s| *s >= self.vr_r));
        let mut present: Vec<u64> = present.collect();
        present.sort_unstable();
        for s in present {
            while expect < s {
                if missing.len() == self.cfg.max_status_nacks {
                    return StatusReport {
                        vr_r: self.vr_r,
                        covered_to: Some(covered),
                        missing,
                    };
                }
                missing.push(expect);
                covered = expect;
                expect += 1;
            }
            covered = s;
            expect = s + 1;
        }
        debug_assert_eq!(covered, highest);
        StatusReport {
            vr_r: self.vr_r,
            covered_to: Some(covered),
            missing,
        }
    }
}
