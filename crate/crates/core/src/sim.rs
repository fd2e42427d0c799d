//! The single-cell scenario: one test UE running a CBR stream and a TCP
//! download through the full RNC, Iub, MAC-hs and radio stack, sharing the
//! HS-DSCH with saturated background users.

use std::collections::HashMap;

use rand::Rng;

use crate::buffer::{FlowClass, MacdPdu, TspBuffer, PDU_SIZE_BITS};
use crate::config::{ConfigError, ScenarioConfig};
use crate::engine::{EventId, EventQueue, Model, RngStreams, SimRng, SimTime, Simulation, TTI};
use crate::flow_control::{nrt_headroom, FlowControlState, HsDschFrames, RncQueue};
use crate::radio::{
    decode_outcome, select_amc, ChannelState, HarqEntity, HarqOutcome, HarqState, Shadowing,
};
use crate::rlc::{AmReceiver, AmSender, DeliveredSdu, DiscardNotice, StatusReport, UmReceiver, UmSender};
use crate::scheduler::{build_transport_block, filler_block, MacHsPdu, ReorderTimer, ReorderingQueue, RoundRobin};
use crate::traffic::{
    average_throughput_bps, discard_ratio, CbrSource, PlayoutBuffer, PlayoutCmd, Segment, SimMetrics,
    TcpReceiver, TcpSender,
};

/// Index of the instrumented user.
pub const TEST_UE: usize = 0;

#[derive(Debug, Clone)]
pub enum Event {
    Tti,
    Frame,
    CbrEmit(u64),
    RtAtRnc { packet: u64, created: SimTime },
    SegmentAtRnc(Segment),
    AckAtSender(u64),
    Rto,
    IubArrival(HsDschFrames),
    HarqFeedback { ue: usize, pid: usize },
    StatusAtRnc(StatusReport),
    DiscardAtUe(DiscardNotice),
    ReorderTimeout { class: FlowClass, generation: u64 },
    PlayoutTick,
}

#[derive(Debug, Clone)]
struct UeRadio {
    channel: ChannelState,
    harq: HarqEntity<MacHsPdu>,
    shadow_rng: SimRng,
    decode_rng: SimRng,
}

#[derive(Debug, Clone, Copy, Default)]
struct Counters {
    rt_emitted: u64,
    rt_at_rnc: u64,
    rt_transit_lost: u64,
    harq_drops: u64,
    harq_no_idle: u64,
    test_ttis: u64,
}

/// Scenario state; implements [`Model`].
#[derive(Debug)]
pub struct Scenario {
    cfg: ScenarioConfig,
    ues: Vec<UeRadio>,
    shadowing: Shadowing,
    rr: RoundRobin,
    buffer: TspBuffer,
    fc: FlowControlState,
    rnc: RncQueue,
    iub_in_flight: [u32; 2],
    um_tx: UmSender,
    um_rx: UmReceiver,
    am_tx: AmSender,
    am_rx: AmReceiver,
    tcp_tx: TcpSender,
    tcp_rx: TcpReceiver,
    rto_event: Option<(SimTime, EventId)>,
    sdu_segments: HashMap<u64, Segment>,
    next_sdu: u64,
    tsn: [u64; 2],
    reorder: [ReorderingQueue<Vec<MacdPdu>>; 2],
    playout: PlayoutBuffer,
    cbr: CbrSource,
    n: Counters,
}

fn flow_of(class: FlowClass) -> usize {
    class.index()
}

impl Scenario {
    /// Builds the scenario for one replication. `cfg` must be valid.
    pub fn new(cfg: &ScenarioConfig, seed: u64) -> Self {
        let streams = RngStreams::new(seed);
        let shadowing = Shadowing::from_config(&cfg.radio);
        let mut placement = streams.stream(RngStreams::PLACEMENT);
        let users = cfg.users as usize;
        let mut ues = Vec::with_capacity(users);
        for i in 0..users {
            let mut shadow_rng = streams.stream(&format!("{}-{i}", RngStreams::SHADOWING));
            let decode_rng = streams.stream(&format!("{}-{i}", RngStreams::DECODE));
            let (d0, speed) = if i == TEST_UE {
                (cfg.test_ue_distance_km, cfg.test_ue_speed_kmh)
            } else {
                // uniform over the ring area
                let (a, b) = (cfg.background_min_km, cfg.background_max_km);
                let u: f64 = placement.random();
                ((a * a + u * (b * b - a * a)).sqrt(), 0.0)
            };
            let x0 = shadowing.initial(&mut shadow_rng);
            ues.push(UeRadio {
                channel: ChannelState::new(d0, speed, x0),
                harq: HarqEntity::new(cfg.radio.num_harq_processes, cfg.radio.max_harq_transmissions),
                shadow_rng,
                decode_rng,
            });
        }
        let cbr = CbrSource {
            rate_bps: cfg.qos.lambda_rt_bps,
            packet_bits: PDU_SIZE_BITS,
            duration: cfg.session,
        };
        Self {
            ues,
            shadowing,
            rr: RoundRobin::new(users),
            buffer: TspBuffer::new(cfg.scheme, cfg.buffer, cfg.priority()),
            fc: FlowControlState::new(cfg.flow_control, &cfg.qos),
            rnc: RncQueue::new(),
            iub_in_flight: [0; 2],
            um_tx: UmSender::default(),
            um_rx: UmReceiver::default(),
            am_tx: AmSender::new(cfg.rlc.clone()),
            am_rx: AmReceiver::new(cfg.rlc.clone()),
            tcp_tx: TcpSender::new(cfg.tcp),
            tcp_rx: TcpReceiver::default(),
            rto_event: None,
            sdu_segments: HashMap::new(),
            next_sdu: 0,
            tsn: [0; 2],
            reorder: [
                ReorderingQueue::new(cfg.delays.reorder_timeout),
                ReorderingQueue::new(cfg.delays.reorder_timeout),
            ],
            playout: PlayoutBuffer::new(cfg.playout_buffering, cbr.interval()),
            cbr,
            n: Counters::default(),
            cfg: cfg.clone(),
        }
    }

    pub fn buffer(&self) -> &TspBuffer {
        &self.buffer
    }

    fn send_segments(&mut self, segs: Vec<Segment>, q: &mut EventQueue<Event>) {
        for s in segs {
            q.schedule_in(self.cfg.delays.core, Event::SegmentAtRnc(s));
        }
        self.sync_rto(q);
    }

    fn sync_rto(&mut self, q: &mut EventQueue<Event>) {
        let want = self.tcp_tx.rto_deadline();
        if self.rto_event.map(|(t, _)| t) == want {
            return;
        }
        if let Some((_, id)) = self.rto_event.take() {
            q.cancel(id);
        }
        if let Some(t) = want {
            self.rto_event = Some((t, q.schedule(t, Event::Rto)));
        }
    }

    fn on_tti(&mut self, now: SimTime, q: &mut EventQueue<Event>) {
        let radio = &self.cfg.radio;
        for ue in &mut self.ues {
            ue.channel
                .update(now, radio, &self.shadowing, &mut ue.shadow_rng)
                .expect("distances stay positive");
        }
        self.buffer.discard_timer_sweep(now);

        let test_has_data = !self.buffer.is_empty();
        let nrt_waiting = self.buffer.n() > 0;
        let eligible: Vec<bool> = self
            .ues
            .iter()
            .enumerate()
            .map(|(i, u)| {
                if u.harq.pending_retransmission().is_some() {
                    return true;
                }
                let has_data = i != TEST_UE || test_has_data;
                if !has_data || u.channel.reported_cqi(now, radio) == 0 {
                    return false;
                }
                if u.harq.idle_process().is_none() {
                    if i == TEST_UE {
                        self.n.harq_no_idle += 1;
                    }
                    return false;
                }
                true
            })
            .collect();
        let Some(ue_id) = self.rr.schedule(|i| eligible[i]) else {
            return;
        };

        let feedback_at = now + radio.harq_feedback_latency;
        let ue = &mut self.ues[ue_id];
        let sinr = ue.channel.sinr_db;
        let nrt_bits;
        if let Some(pid) = ue.harq.pending_retransmission() {
            let p = ue.harq.process(pid);
            let scheme = p.scheme.expect("pending process has a scheme");
            let attempt = p.tx_count + 1;
            nrt_bits = p
                .payload
                .as_ref()
                .filter(|b| b.flow == FlowClass::Nrt)
                .map_or(0, |b| b.payload_bits());
            let ok = decode_outcome(&mut ue.decode_rng, radio, scheme, sinr, attempt);
            ue.harq.retransmit(pid, ok);
            q.schedule(feedback_at, Event::HarqFeedback { ue: ue_id, pid });
        } else {
            let pid = ue.harq.idle_process().expect("eligible user has an idle process");
            let amc = select_amc(radio, ue.channel.reported_cqi(now, radio))
                .expect("eligible user has a CQI");
            let block = if ue_id == TEST_UE {
                build_transport_block(
                    ue_id,
                    &mut self.buffer,
                    Some(amc),
                    self.cfg.mac_hs_header_bits,
                    pid,
                    &mut self.tsn,
                    now,
                )
            } else {
                Some(filler_block(ue_id, amc, self.cfg.mac_hs_header_bits, pid, 0, now))
            };
            let Some(block) = block else { return };
            nrt_bits = if block.flow == FlowClass::Nrt {
                block.payload_bits()
            } else {
                0
            };
            let ok = decode_outcome(&mut ue.decode_rng, radio, amc.scheme, sinr, 1);
            ue.harq.transmit(pid, block, amc.scheme, ok);
            q.schedule(feedback_at, Event::HarqFeedback { ue: ue_id, pid });
        }
        if ue_id == TEST_UE {
            self.n.test_ttis += 1;
            // only opportunities the NRT flow could have used enter the estimate
            if nrt_waiting || nrt_bits > 0 {
                self.fc.update_nrt_rate(nrt_bits, now);
            }
        }
    }

    fn on_frame(&mut self, now: SimTime, q: &mut EventQueue<Event>) {
        self.fc.update_occupancy_filter(self.buffer.occupancy());
        let mut grant = self
            .fc
            .compute_credits(&self.cfg.qos, &self.cfg.buffer, self.rnc.nrt_backlog());
        if self.cfg.flow_control.headroom_cap {
            let room = nrt_headroom(
                &self.cfg.buffer,
                self.buffer.r(),
                self.buffer.n(),
                self.iub_in_flight[flow_of(FlowClass::Rt)],
                self.iub_in_flight[flow_of(FlowClass::Nrt)],
            );
            grant.c_nrt = grant.c_nrt.min(room);
        }
        let frames = self.rnc.release_frame(grant);
        for p in &frames.nrt {
            self.am_tx.on_shipped(p.rlc_seq, now);
        }
        self.am_tx.prune_acked_sdus();
        if frames.rt.is_empty() && frames.nrt.is_empty() {
            return;
        }
        self.iub_in_flight[flow_of(FlowClass::Rt)] += frames.rt.len() as u32;
        self.iub_in_flight[flow_of(FlowClass::Nrt)] += frames.nrt.len() as u32;
        q.schedule(now + self.cfg.delays.iub, Event::IubArrival(frames));
    }

    fn on_iub_arrival(&mut self, now: SimTime, frames: HsDschFrames) {
        self.iub_in_flight[flow_of(FlowClass::Rt)] -= frames.rt.len() as u32;
        self.iub_in_flight[flow_of(FlowClass::Nrt)] -= frames.nrt.len() as u32;
        // the discard timer expires on its own schedule, not at the next TTI
        self.buffer.discard_timer_sweep(now);
        for p in frames.rt.into_iter().chain(frames.nrt) {
            self.buffer.admit(p, now);
        }
    }

    fn on_harq_feedback(&mut self, now: SimTime, ue: usize, pid: usize, q: &mut EventQueue<Event>) {
        match self.ues[ue].harq.feedback(pid) {
            HarqOutcome::Retransmit => {}
            HarqOutcome::Dropped { payload, .. } => {
                self.n.harq_drops += 1;
                if ue == TEST_UE && payload.flow == FlowClass::Rt {
                    self.n.rt_transit_lost += payload.sdus.len() as u64;
                }
            }
            HarqOutcome::Delivered { payload, .. } => {
                if ue != TEST_UE {
                    return;
                }
                let class = payload.flow;
                let rq = &mut self.reorder[flow_of(class)];
                if payload.tsn < rq.next_tsn() {
                    if class == FlowClass::Rt {
                        self.n.rt_transit_lost += payload.sdus.len() as u64;
                    }
                }
                let (released, timer) = rq.receive(payload.tsn, payload.sdus, now);
                self.arm_reorder(class, timer, q);
                self.deliver_blocks(now, released, q);
            }
        }
    }

    fn arm_reorder(&self, class: FlowClass, timer: Option<ReorderTimer>, q: &mut EventQueue<Event>) {
        if let Some(t) = timer {
            q.schedule(
                t.deadline,
                Event::ReorderTimeout {
                    class,
                    generation: t.generation,
                },
            );
        }
    }

    fn deliver_blocks(&mut self, now: SimTime, blocks: Vec<Vec<MacdPdu>>, q: &mut EventQueue<Event>) {
        for block in blocks {
            let mut last_status = None;
            for pdu in block {
                match pdu.flow {
                    FlowClass::Rt => {
                        for sdu in self.um_rx.receive(pdu) {
                            let cmd = self.playout.on_arrival(sdu.sdu_id, now);
                            self.apply_playout(cmd, q);
                        }
                    }
                    FlowClass::Nrt => {
                        let (sdus, status) = self.am_rx.receive(pdu);
                        last_status = Some(status);
                        self.deliver_tcp(sdus, q);
                    }
                }
            }
            // the newest report subsumes earlier ones generated in this block
            if let Some(s) = last_status {
                q.schedule(now + self.cfg.delays.rlc_status, Event::StatusAtRnc(s));
            }
        }
    }

    fn deliver_tcp(&mut self, sdus: Vec<DeliveredSdu>, q: &mut EventQueue<Event>) {
        let back = self.cfg.delays.uplink_radio + self.cfg.delays.core;
        for sdu in sdus {
            let seg = self
                .sdu_segments
                .remove(&sdu.sdu_id)
                .expect("every RLC SDU carries a TCP segment");
            let ack = self.tcp_rx.on_segment(seg);
            q.schedule_in(back, Event::AckAtSender(ack));
        }
    }

    fn apply_playout(&self, cmd: PlayoutCmd, q: &mut EventQueue<Event>) {
        match cmd {
            PlayoutCmd::StartAt(t) | PlayoutCmd::TickAt(t) => {
                q.schedule(t, Event::PlayoutTick);
            }
            PlayoutCmd::None => {}
        }
    }

    fn on_status(&mut self, now: SimTime, report: StatusReport, q: &mut EventQueue<Event>) {
        let (outcome, fresh) = self.am_tx.on_status(&report, now);
        for p in outcome.retransmit.into_iter().rev() {
            self.rnc.push_nrt_front(p);
        }
        for p in fresh {
            self.rnc.push_nrt(p);
        }
        for d in outcome.discarded {
            self.rnc.purge_nrt(|p| p.sdu_id == d.sdu_id);
            q.schedule(now + self.cfg.delays.iub + self.cfg.delays.rlc_status, Event::DiscardAtUe(d));
        }
    }

    /// RT PDUs somewhere between the source and the playout buffer.
    fn rt_in_flight(&self) -> u64 {
        let rt = flow_of(FlowClass::Rt);
        let harq: usize = self.ues[TEST_UE]
            .harq_payloads()
            .filter(|b| b.flow == FlowClass::Rt)
            .map(|b| b.sdus.len())
            .sum();
        let reorder: usize = self.reorder[rt].held_items().map(Vec::len).sum();
        (self.n.rt_emitted - self.n.rt_at_rnc)
            + u64::from(self.rnc.rt_backlog())
            + u64::from(self.iub_in_flight[rt])
            + u64::from(self.buffer.r())
            + harq as u64
            + reorder as u64
            + self.playout.buffered() as u64
    }
}

impl UeRadio {
    fn harq_payloads(&self) -> impl Iterator<Item = &MacHsPdu> {
        (0..self.harq.len()).filter_map(|i| {
            let p = self.harq.process(i);
            (p.state != HarqState::Idle).then(|| p.payload.as_ref()).flatten()
        })
    }
}

impl Model for Scenario {
    type Event = Event;
    type Output = SimMetrics;

    fn start(&mut self, q: &mut EventQueue<Event>) {
        q.schedule(SimTime::ZERO, Event::Tti);
        q.schedule(SimTime::ZERO, Event::Frame);
        if self.cbr.packet_count() > 0 {
            q.schedule(SimTime::ZERO, Event::CbrEmit(0));
        }
        let segs = self.tcp_tx.poll_send(SimTime::ZERO);
        self.send_segments(segs, q);
    }

    fn handle(&mut self, now: SimTime, ev: Event, q: &mut EventQueue<Event>) {
        match ev {
            Event::Tti => {
                self.on_tti(now, q);
                q.schedule(now + TTI, Event::Tti);
            }
            Event::Frame => {
                self.on_frame(now, q);
                q.schedule(now + self.cfg.flow_control.frame_period, Event::Frame);
            }
            Event::CbrEmit(k) => {
                self.n.rt_emitted += 1;
                q.schedule(now + self.cfg.delays.core, Event::RtAtRnc { packet: k, created: now });
                if k + 1 < self.cbr.packet_count() {
                    q.schedule(self.cbr.emission_time(k + 1), Event::CbrEmit(k + 1));
                }
            }
            Event::RtAtRnc { packet, created } => {
                self.n.rt_at_rnc += 1;
                for p in self.um_tx.send(packet, self.cbr.packet_bits, created) {
                    self.rnc.push_rt(p);
                }
            }
            Event::SegmentAtRnc(seg) => {
                let sdu = self.next_sdu;
                self.next_sdu += 1;
                self.sdu_segments.insert(sdu, seg);
                for p in self.am_tx.submit_sdu(sdu, seg.len * 8, now) {
                    self.rnc.push_nrt(p);
                }
            }
            Event::AckAtSender(ack) => {
                let segs = self.tcp_tx.on_ack(ack, now);
                self.send_segments(segs, q);
            }
            Event::Rto => {
                self.rto_event = None;
                let segs = self.tcp_tx.on_timeout(now);
                self.send_segments(segs, q);
            }
            Event::IubArrival(frames) => self.on_iub_arrival(now, frames),
            Event::HarqFeedback { ue, pid } => self.on_harq_feedback(now, ue, pid, q),
            Event::StatusAtRnc(report) => self.on_status(now, report, q),
            Event::DiscardAtUe(notice) => {
                let sdus = self.am_rx.apply_discard(&notice);
                self.deliver_tcp(sdus, q);
            }
            Event::ReorderTimeout { class, generation } => {
                let (released, timer) = self.reorder[flow_of(class)].expire(generation, now);
                self.arm_reorder(class, timer, q);
                self.deliver_blocks(now, released, q);
            }
            Event::PlayoutTick => {
                let cmd = self.playout.on_tick(now);
                self.apply_playout(cmd, q);
            }
        }
    }

    fn finish(&mut self, _q: &EventQueue<Event>) -> SimMetrics {
        let c = *self.buffer.counters();
        let tcp = self.tcp_tx.stats();
        let am = self.am_tx.stats();
        SimMetrics {
            nrt_throughput_bps: average_throughput_bps(self.tcp_rx.delivered_bytes, self.cfg.session),
            rt_discard_ratio: discard_ratio(c.rt_dt_discards, c.rt_admitted),
            rt_underruns: self.playout.underruns,
            rt_packets_played: self.playout.played,
            nrt_admission_drops: c.nrt_admission_drops,
            rt_admission_drops: c.rt_admission_drops,
            rt_packets_emitted: self.n.rt_emitted,
            rt_admitted: c.rt_admitted,
            rt_dt_discards: c.rt_dt_discards,
            rt_um_gap_losses: self.n.rt_transit_lost,
            rt_in_flight_at_end: self.rt_in_flight(),
            rt_late_packets: self.um_rx.late_pdus + self.playout.late_packets,
            nrt_bytes_delivered: self.tcp_rx.delivered_bytes,
            tcp_retransmissions: tcp.retransmissions,
            tcp_timeouts: tcp.timeouts,
            rlc_retransmissions: am.retransmissions,
            rlc_sdu_discards: am.sdus_discarded,
            harq_drops: self.n.harq_drops,
            harq_no_idle_process: self.n.harq_no_idle,
            test_ue_ttis: self.n.test_ttis,
            playout: std::mem::take(&mut self.playout.samples),
        }
    }
}

/// Runs one replication of `cfg` with the given seed.
pub fn run_scenario(cfg: &ScenarioConfig, seed: u64) -> Result<SimMetrics, ConfigError> {
    cfg.validate()?;
    let mut sim = Simulation::new(Scenario::new(cfg, seed));
    // half-open session: [0, session)
    let end = SimTime::from_micros(cfg.session.as_micros() - 1);
    Ok(sim.run_until(end))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::buffer::Scheme;

    fn short(scheme: Scheme, users: u32, secs: u64) -> ScenarioConfig {
        let mut c = ScenarioConfig::default();
        c.scheme = scheme;
        c.users = users;
        c.session = SimTime::from_secs(secs);
        c
    }

    #[test]
    fn ideal_channel_single_user_delivers_everything() {
        let mut c = short(Scheme::DynamicTsp, 1, 10);
        c.radio.bler_target = 0.0;
        c.radio.shadowing_sigma_db = 0.0;
        c.test_ue_speed_kmh = 0.0;
        let m = run_scenario(&c, 7).unwrap();
        assert_eq!(m.rt_packets_emitted, 2000);
        assert_eq!(m.harq_drops, 0);
        assert_eq!(m.rt_underruns, 0);
        assert_eq!(m.rt_dt_discards, 0);
        assert!(m.rt_packets_played > 1900, "{}", m.rt_packets_played);
        assert!(m.nrt_throughput_bps > 0.0);
        assert!(m.rt_ledger_balanced(), "{m:?}");
    }

    #[test]
    fn same_seed_same_metrics() {
        let c = short(Scheme::StaticTsp, 3, 5);
        let a = run_scenario(&c, 11).unwrap();
        let b = run_scenario(&c, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ledger_holds_under_load() {
        for scheme in [Scheme::Cbs, Scheme::StaticTsp, Scheme::DynamicTsp] {
            let m = run_scenario(&short(scheme, 10, 8), 3).unwrap();
            assert!(m.rt_ledger_balanced(), "{scheme:?}: {m:?}");
        }
    }
}
