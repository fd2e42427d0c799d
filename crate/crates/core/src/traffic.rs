//! Application and transport endpoints: the CBR video source, a Reno-style
//! TCP bulk transfer, the UE playout buffer and session metrics.

use std::collections::{BTreeMap, BTreeSet};

use crate::engine::SimTime;

// ---------------------------------------------------------------------------
// CBR source

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CbrSource {
    pub rate_bps: u64,
    pub packet_bits: u32,
    pub duration: SimTime,
}

impl Default for CbrSource {
    fn default() -> Self {
        Self {
            rate_bps: 64_000,
            packet_bits: 320,
            duration: SimTime::from_secs(120),
        }
    }
}

impl CbrSource {
    pub fn interval(&self) -> SimTime {
        SimTime::from_micros(u64::from(self.packet_bits) * 1_000_000 / self.rate_bps)
    }

    /// Packets emitted over the session: `rate * duration / packet_bits`.
    pub fn packet_count(&self) -> u64 {
        self.rate_bps * self.duration.as_micros() / 1_000_000 / u64::from(self.packet_bits)
    }

    pub fn emission_time(&self, k: u64) -> SimTime {
        self.interval() * k
    }
}

// ---------------------------------------------------------------------------
// TCP

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TcpConfig {
    pub mss_bytes: u32,
    pub rwnd_bytes: u32,
    pub initial_cwnd_mss: u32,
    /// `None` means the receiver window.
    pub initial_ssthresh_bytes: Option<u32>,
    pub dupack_threshold: u32,
    pub initial_rto: SimTime,
    pub min_rto: SimTime,
    pub max_rto: SimTime,
    pub clock_granularity: SimTime,
}

impl Default for TcpConfig {
    fn default() -> Self {
        Self {
            mss_bytes: 512,
            rwnd_bytes: 32 * 1024,
            initial_cwnd_mss: 1,
            initial_ssthresh_bytes: None,
            dupack_threshold: 3,
            initial_rto: SimTime::from_secs(3),
            min_rto: SimTime::from_secs(1),
            max_rto: SimTime::from_secs(60),
            clock_granularity: SimTime::from_millis(100),
        }
    }
}

impl TcpConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.mss_bytes == 0 || self.initial_cwnd_mss == 0 || self.dupack_threshold == 0 {
            return Err("tcp.mss, tcp.initial_cwnd_mss and tcp.dupacks must be positive".into());
        }
        if self.rwnd_bytes < self.mss_bytes {
            return Err("tcp.rwnd must hold at least one segment".into());
        }
        if self.min_rto > self.max_rto {
            return Err("tcp.min_rto exceeds tcp.max_rto".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub seq: u64,
    pub len: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TcpSenderStats {
    pub segments_sent: u64,
    pub retransmissions: u64,
    pub fast_retransmits: u64,
    pub timeouts: u64,
}

/// Reno sender with an infinite backlog.
#[derive(Debug, Clone)]
pub struct TcpSender {
    cfg: TcpConfig,
    pub cwnd: u32,
    pub ssthresh: u32,
    snd_una: u64,
    snd_nxt: u64,
    /// Highest sequence ever sent; go-back-N after a timeout resends below it.
    snd_max: u64,
    dupacks: u32,
    recover: Option<u64>,
    /// Fractional congestion-avoidance growth, in bytes.
    ca_acc: u64,
    srtt: Option<f64>,
    rttvar: f64,
    rto: SimTime,
    timed: Option<(u64, SimTime)>,
    rto_deadline: Option<SimTime>,
    stats: TcpSenderStats,
}

impl TcpSender {
    pub fn new(cfg: TcpConfig) -> Self {
        Self {
            cwnd: cfg.initial_cwnd_mss * cfg.mss_bytes,
            ssthresh: cfg.initial_ssthresh_bytes.unwrap_or(cfg.rwnd_bytes),
            snd_una: 0,
            snd_nxt: 0,
            snd_max: 0,
            dupacks: 0,
            recover: None,
            ca_acc: 0,
            srtt: None,
            rttvar: 0.0,
            rto: cfg.initial_rto,
            timed: None,
            rto_deadline: None,
            stats: TcpSenderStats::default(),
            cfg,
        }
    }

    pub fn snd_una(&self) -> u64 {
        self.snd_una
    }

    pub fn snd_nxt(&self) -> u64 {
        self.snd_nxt
    }

    pub fn flight(&self) -> u64 {
        self.snd_nxt - self.snd_una
    }

    pub fn rto(&self) -> SimTime {
        self.rto
    }

    pub fn in_recovery(&self) -> bool {
        self.recover.is_some()
    }

    pub fn stats(&self) -> TcpSenderStats {
        self.stats
    }

    /// When the retransmission timer should fire, if running.
    pub fn rto_deadline(&self) -> Option<SimTime> {
        self.rto_deadline
    }

    fn window(&self) -> u64 {
        u64::from(self.cwnd.min(self.cfg.rwnd_bytes))
    }

    fn make_segment(&mut self, seq: u64, now: SimTime) -> Segment {
        let seg = Segment {
            seq,
            len: self.cfg.mss_bytes,
        };
        self.stats.segments_sent += 1;
        if seq < self.snd_max {
            self.stats.retransmissions += 1;
            if self.timed.is_some_and(|(s, _)| s <= seq) {
                self.timed = None;
            }
        } else if self.timed.is_none() {
            self.timed = Some((seq, now));
        }
        if self.rto_deadline.is_none() {
            self.rto_deadline = Some(now + self.rto);
        }
        seg
    }

    /// Segments the window allows right now.
    pub fn poll_send(&mut self, now: SimTime) -> Vec<Segment> {
        let mss = u64::from(self.cfg.mss_bytes);
        let mut out = Vec::new();
        while self.snd_nxt + mss - self.snd_una <= self.window() {
            let seq = self.snd_nxt;
            let seg = self.make_segment(seq, now);
            self.snd_nxt += mss;
            self.snd_max = self.snd_max.max(self.snd_nxt);
            out.push(seg);
        }
        out
    }

    fn sample_rtt(&mut self, r: f64) {
        match self.srtt {
            None => {
                self.srtt = Some(r);
                self.rttvar = r / 2.0;
            }
            Some(s) => {
                self.rttvar = 0.75 * self.rttvar + 0.25 * (s - r).abs();
                self.srtt = Some(0.875 * s + 0.125 * r);
            }
        }
        let g = self.cfg.clock_granularity.as_secs_f64();
        let raw = self.srtt.expect("set above") + g.max(4.0 * self.rttvar);
        let us = (raw * 1e6).round() as u64;
        self.rto = SimTime::from_micros(us)
            .max(self.cfg.min_rto)
            .min(self.cfg.max_rto);
    }

    fn flight_half(&self) -> u32 {
        let half = (self.flight() / 2) as u32;
        half.max(2 * self.cfg.mss_bytes)
    }

    /// Processes a cumulative ACK; returns segments to send (a fast
    /// retransmission first, then new data).
    pub fn on_ack(&mut self, ack: u64, now: SimTime) -> Vec<Segment> {
        let mss = self.cfg.mss_bytes;
        let mut out = Vec::new();
        if ack > self.snd_una {
            let acked = ack - self.snd_una;
            self.snd_una = ack;
            if self.snd_nxt < ack {
                self.snd_nxt = ack;
            }
            self.dupacks = 0;
            if let Some((seq, at)) = self.timed {
                if ack > seq {
                    self.sample_rtt(now.saturating_sub(at).as_secs_f64());
                    self.timed = None;
                }
            }
            match self.recover {
                Some(r) if ack < r => {}
                Some(_) => {
                    self.recover = None;
                }
                None => {
                    if self.cwnd < self.ssthresh {
                        self.cwnd += (acked as u32).min(mss);
                    } else {
                        self.ca_acc += u64::from(mss) * u64::from(mss);
                        let inc = self.ca_acc / u64::from(self.cwnd);
                        if inc > 0 {
                            self.ca_acc -= inc * u64::from(self.cwnd);
                            self.cwnd += inc as u32;
                        }
                    }
                }
            }
            self.rto_deadline = if self.flight() > 0 {
                Some(now + self.rto)
            } else {
                None
            };
        } else if ack == self.snd_una && self.flight() > 0 {
            self.dupacks += 1;
            if self.dupacks == self.cfg.dupack_threshold && self.recover.is_none() {
                self.ssthresh = self.flight_half();
                self.cwnd = self.ssthresh;
                self.recover = Some(self.snd_nxt);
                self.stats.fast_retransmits += 1;
                out.push(self.make_segment(self.snd_una, now));
            }
        }
        out.extend(self.poll_send(now));
        out
    }

    /// Retransmission timeout: back to one segment and slow start.
    pub fn on_timeout(&mut self, now: SimTime) -> Vec<Segment> {
        self.rto_deadline = None;
        if self.flight() == 0 {
            return Vec::new();
        }
        self.stats.timeouts += 1;
        self.ssthresh = self.flight_half();
        self.cwnd = self.cfg.mss_bytes;
        self.dupacks = 0;
        self.recover = None;
        self.ca_acc = 0;
        self.timed = None;
        self.rto = (self.rto * 2).min(self.cfg.max_rto);
        self.snd_nxt = self.snd_una;
        self.poll_send(now)
    }
}

/// Cumulative-ACK receiver with out-of-order buffering.
#[derive(Debug, Clone, Default)]
pub struct TcpReceiver {
    rcv_nxt: u64,
    ooo: BTreeMap<u64, u32>,
    pub delivered_bytes: u64,
    pub duplicate_segments: u64,
}

impl TcpReceiver {
    pub fn rcv_nxt(&self) -> u64 {
        self.rcv_nxt
    }

    /// Accepts a segment and returns the ACK number to send back.
    pub fn on_segment(&mut self, seg: Segment) -> u64 {
        let end = seg.seq + u64::from(seg.len);
        if end <= self.rcv_nxt || self.ooo.contains_key(&seg.seq) {
            self.duplicate_segments += 1;
        } else if seg.seq <= self.rcv_nxt {
            self.advance_to(end);
        } else {
            self.ooo.insert(seg.seq, seg.len);
        }
        self.rcv_nxt
    }

    fn advance_to(&mut self, end: u64) {
        let start = self.rcv_nxt;
        self.rcv_nxt = end;
        while let Some((&s, &l)) = self.ooo.first_key_value() {
            if s > self.rcv_nxt {
                break;
            }
            self.ooo.remove(&s);
            self.rcv_nxt = self.rcv_nxt.max(s + u64::from(l));
        }
        self.delivered_bytes += self.rcv_nxt - start;
    }
}

// ---------------------------------------------------------------------------
// Playout

/// What the UE playout process should do next.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlayoutCmd {
    /// Schedule the first tick at this time.
    StartAt(SimTime),
    /// Schedule the next tick at this time.
    TickAt(SimTime),
    None,
}

/// UE de-jitter buffer: playout starts `initial_buffering` after the first
/// arrival and then plays one packet every `interval`. An empty buffer at a
/// tick stalls playout until the next arrival.
#[derive(Debug, Clone)]
pub struct PlayoutBuffer {
    pub initial_buffering: SimTime,
    pub interval: SimTime,
    started: bool,
    stalled: bool,
    queue: BTreeSet<u64>,
    last_played_seq: Option<u64>,
    last_play: Option<SimTime>,
    pub played: u64,
    pub underruns: u64,
    pub late_packets: u64,
    /// `(play time, delay since previous play)`.
    pub samples: Vec<(SimTime, SimTime)>,
}

impl PlayoutBuffer {
    pub fn new(initial_buffering: SimTime, interval: SimTime) -> Self {
        Self {
            initial_buffering,
            interval,
            started: false,
            stalled: false,
            queue: BTreeSet::new(),
            last_played_seq: None,
            last_play: None,
            played: 0,
            underruns: 0,
            late_packets: 0,
            samples: Vec::new(),
        }
    }

    pub fn buffered(&self) -> usize {
        self.queue.len()
    }

    pub fn on_arrival(&mut self, seq: u64, now: SimTime) -> PlayoutCmd {
        if self.last_played_seq.is_some_and(|p| seq <= p) {
            self.late_packets += 1;
            return PlayoutCmd::None;
        }
        self.queue.insert(seq);
        if !self.started {
            self.started = true;
            return PlayoutCmd::StartAt(now + self.initial_buffering);
        }
        if self.stalled {
            self.stalled = false;
            self.play_head(now);
            return PlayoutCmd::TickAt(now + self.interval);
        }
        PlayoutCmd::None
    }

    pub fn on_tick(&mut self, now: SimTime) -> PlayoutCmd {
        if self.queue.is_empty() {
            self.stalled = true;
            return PlayoutCmd::None;
        }
        self.play_head(now);
        PlayoutCmd::TickAt(now + self.interval)
    }

    fn play_head(&mut self, now: SimTime) {
        let seq = self.queue.pop_first().expect("non-empty");
        if let Some(prev) = self.last_play {
            let gap = now - prev;
            if gap > self.interval {
                self.underruns += 1;
            }
            self.samples.push((now, gap));
        }
        self.last_play = Some(now);
        self.last_played_seq = Some(seq);
        self.played += 1;
    }
}

// ---------------------------------------------------------------------------
// Metrics

/// Average throughput over the session in bits/s.
pub fn average_throughput_bps(bytes: u64, session: SimTime) -> f64 {
    if session == SimTime::ZERO {
        return 0.0;
    }
    bytes as f64 * 8.0 / session.as_secs_f64()
}

/// Discard-timer drops over RT PDUs admitted to MAC-hs; zero if none.
pub fn discard_ratio(dt_discards: u64, admitted: u64) -> f64 {
    if admitted == 0 {
        0.0
    } else {
        dt_discards as f64 / admitted as f64
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimMetrics {
    pub nrt_throughput_bps: f64,
    pub rt_discard_ratio: f64,
    pub rt_underruns: u64,
    pub rt_packets_played: u64,
    pub nrt_admission_drops: u64,
    pub rt_admission_drops: u64,

    pub rt_packets_emitted: u64,
    pub rt_admitted: u64,
    pub rt_dt_discards: u64,
    pub rt_um_gap_losses: u64,
    pub rt_in_flight_at_end: u64,
    pub rt_late_packets: u64,
    pub nrt_bytes_delivered: u64,
    pub tcp_retransmissions: u64,
    pub tcp_timeouts: u64,
    pub rlc_retransmissions: u64,
    pub rlc_sdu_discards: u64,
    pub harq_drops: u64,
    pub harq_no_idle_process: u64,
    pub test_ue_ttis: u64,
    /// `(play time, inter-packet delay)` at the test UE.
    pub playout: Vec<(SimTime, SimTime)>,
}

impl SimMetrics {
    /// RT packet conservation from source to playout.
    pub fn rt_ledger_balanced(&self) -> bool {
        self.rt_packets_emitted
            == self.rt_packets_played
                + self.rt_admission_drops
                + self.rt_dt_discards
                + self.rt_um_gap_losses
                + self.rt_late_packets
                + self.rt_in_flight_at_end
    }
}
