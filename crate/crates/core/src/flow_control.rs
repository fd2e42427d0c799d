//! Credit-based RNC to Node-B flow control.
//!
//! Every frame period the Node B samples its buffer occupancy into a moving
//! average, and turns the RT guaranteed bit rate and a filtered estimate of
//! the NRT radio rate into per-frame credits. The RNC then ships at most that
//! many PDUs of each class.

use std::collections::VecDeque;

use crate::buffer::{BufferConfig, MacdPdu};
use crate::engine::{SimTime, FRAME_PERIOD, TTI};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowQosProfile {
    /// RT guaranteed bit rate.
    pub lambda_rt_bps: u64,
    pub pdu_size_bits: u32,
    /// Peak NRT rate; seeds the rate estimate.
    pub nrt_max_bitrate_bps: u64,
}

impl Default for FlowQosProfile {
    fn default() -> Self {
        Self {
            lambda_rt_bps: 64_000,
            pdu_size_bits: 320,
            nrt_max_bitrate_bps: 256_000,
        }
    }
}

/// How a per-TTI NRT volume becomes the instantaneous rate fed to the filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateNormalization {
    /// Bits sent in the TTI divided by the TTI length.
    Tti,
    /// Bits sent divided by the time since the UE's previous opportunity.
    SinceLastOpportunity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowControlParams {
    /// Occupancy filter weight `w`.
    pub w: f64,
    /// Rate filter weight `alpha`.
    pub alpha: f64,
    /// Overflow-control gain `k`.
    pub k: f64,
    pub frame_period: SimTime,
    pub rate_normalization: RateNormalization,
    /// Also bound NRT credits by free buffer space (see [`nrt_headroom`]).
    pub headroom_cap: bool,
}

impl Default for FlowControlParams {
    fn default() -> Self {
        Self {
            w: 0.7,
            alpha: 0.7,
            k: 0.5,
            frame_period: FRAME_PERIOD,
            rate_normalization: RateNormalization::Tti,
            headroom_cap: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CreditGrant {
    pub c_rt: u32,
    pub c_nrt: u32,
}

/// Per-frame NRT credit ceiling, piecewise in the filtered occupancy:
/// full rate below `L`, scaled by `k` on `[L, H]`, zero above `H`.
pub fn nrt_credit_ceiling(
    nrt_rate_bps: f64,
    pdu_size_bits: u32,
    frame_period: SimTime,
    k: f64,
    q_filtered: f64,
    thresholds: &BufferConfig,
) -> f64 {
    let per_frame = nrt_rate_bps / f64::from(pdu_size_bits) * frame_period.as_secs_f64();
    if q_filtered < f64::from(thresholds.l) {
        per_frame
    } else if q_filtered <= f64::from(thresholds.h) {
        k * per_frame
    } else {
        0.0
    }
}

/// Per-frame RT credits `lambda_rt / pdu_size * T` before carry.
pub fn rt_credits_per_frame(profile: &FlowQosProfile, frame_period: SimTime) -> f64 {
    profile.lambda_rt_bps as f64 / f64::from(profile.pdu_size_bits) * frame_period.as_secs_f64()
}

/// Free space the NRT class may still claim: `N - q - in_flight`, minus the
/// room RT may still legitimately take (`R - r`, less RT already in flight).
pub fn nrt_headroom(
    thresholds: &BufferConfig,
    r: u32,
    n: u32,
    rt_in_flight: u32,
    nrt_in_flight: u32,
) -> u32 {
    let rt_reserve = thresholds.r.saturating_sub(r + rt_in_flight);
    thresholds
        .n
        .saturating_sub(r + n + rt_in_flight + nrt_in_flight + rt_reserve)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowControlState {
    pub params: FlowControlParams,
    /// Filtered occupancy, PDUs.
    pub q_filtered: f64,
    /// Filtered NRT radio rate, bits/s.
    pub nrt_rate_est: f64,
    rt_carry: f64,
    nrt_carry: f64,
    last_opportunity: Option<SimTime>,
}

impl FlowControlState {
    pub fn new(params: FlowControlParams, profile: &FlowQosProfile) -> Self {
        Self {
            params,
            q_filtered: 0.0,
            nrt_rate_est: profile.nrt_max_bitrate_bps as f64,
            rt_carry: 0.0,
            nrt_carry: 0.0,
            last_opportunity: None,
        }
    }

    pub fn nrt_carry(&self) -> f64 {
        self.nrt_carry
    }

    /// `q̄ ← w·q̄ + (1−w)·q`; sampled once per frame.
    pub fn update_occupancy_filter(&mut self, q_now: u32) -> f64 {
        let w = self.params.w;
        self.q_filtered = w * self.q_filtered + (1.0 - w) * f64::from(q_now);
        self.q_filtered
    }

    /// `λ' ← α·λ' + (1−α)·λ`, called at each TTI granted to the UE while it
    /// has NRT data queued, with the NRT bits carried (zero when RT was served).
    pub fn update_nrt_rate(&mut self, bits_sent: u32, now: SimTime) -> f64 {
        let span = match self.params.rate_normalization {
            RateNormalization::Tti => TTI,
            RateNormalization::SinceLastOpportunity => self
                .last_opportunity
                .map_or(TTI, |prev| now.saturating_sub(prev).max(TTI)),
        };
        self.last_opportunity = Some(now);
        let instantaneous = f64::from(bits_sent) / span.as_secs_f64();
        let a = self.params.alpha;
        self.nrt_rate_est = a * self.nrt_rate_est + (1.0 - a) * instantaneous;
        self.nrt_rate_est
    }

    /// Credits for the coming frame. `ubs_nrt` is the NRT backlog at the RNC.
    pub fn compute_credits(
        &mut self,
        profile: &FlowQosProfile,
        thresholds: &BufferConfig,
        ubs_nrt: u32,
    ) -> CreditGrant {
        let rt_total = rt_credits_per_frame(profile, self.params.frame_period) + self.rt_carry;
        let c_rt = rt_total.floor();
        self.rt_carry = rt_total - c_rt;

        let ceiling = nrt_credit_ceiling(
            self.nrt_rate_est,
            profile.pdu_size_bits,
            self.params.frame_period,
            self.params.k,
            self.q_filtered,
            thresholds,
        );
        let nrt_total = ceiling + self.nrt_carry;
        let whole = nrt_total.floor();
        self.nrt_carry = nrt_total - whole;
        let c_nrt = (whole as u64).min(u64::from(ubs_nrt)) as u32;

        CreditGrant {
            c_rt: c_rt as u32,
            c_nrt,
        }
    }
}

/// PDUs shipped in one frame period, one homogeneous frame per class.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HsDschFrames {
    pub rt: Vec<MacdPdu>,
    pub nrt: Vec<MacdPdu>,
}

/// Per-UE RLC output queues at the RNC awaiting credits.
#[derive(Debug, Clone, Default)]
pub struct RncQueue {
    rt: VecDeque<MacdPdu>,
    nrt: VecDeque<MacdPdu>,
}

impl RncQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rt_backlog(&self) -> u32 {
        self.rt.len() as u32
    }

    /// `UBS_NRT`.
    pub fn nrt_backlog(&self) -> u32 {
        self.nrt.len() as u32
    }

    pub fn push_rt(&mut self, pdu: MacdPdu) {
        self.rt.push_back(pdu);
    }

    pub fn push_nrt(&mut self, pdu: MacdPdu) {
        self.nrt.push_back(pdu);
    }

    /// Retransmissions go ahead of fresh data.
    pub fn push_nrt_front(&mut self, pdu: MacdPdu) {
        self.nrt.push_front(pdu);
    }

    /// Drops queued NRT PDUs matching `pred` (used when an SDU is discarded).
    pub fn purge_nrt(&mut self, mut pred: impl FnMut(&MacdPdu) -> bool) -> usize {
        let before = self.nrt.len();
        self.nrt.retain(|p| !pred(p));
        before - self.nrt.len()
    }

    /// Ships at most the granted credits of each class.
    pub fn release_frame(&mut self, grant: CreditGrant) -> HsDschFrames {
        let take_rt = (grant.c_rt as usize).min(self.rt.len());
        let take_nrt = (grant.c_nrt as usize).min(self.nrt.len());
        HsDschFrames {
            rt: self.rt.drain(..take_rt).collect(),
            nrt: self.nrt.drain(..take_nrt).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::buffer::FlowClass;

    fn state() -> FlowControlState {
        FlowControlState::new(FlowControlParams::default(), &FlowQosProfile::default())
    }

    #[test]
    fn occupancy_filter() {
        let mut s = state();
        s.q_filtered = 100.0;
        assert!((s.update_occupancy_filter(50) - 85.0).abs() < 1e-12);
        s.q_filtered = 40.0;
        assert!((s.update_occupancy_filter(40) - 40.0).abs() < 1e-12);
        s.q_filtered = 190.0;
        for _ in 0..50 {
            s.update_occupancy_filter(7);
        }
        // |190 - 7| * 0.7^50 ≈ 3.3e-6; geometric decay of the initial error
        let bound = 183.0 * 0.7f64.powi(50);
        assert!((s.q_filtered - 7.0).abs() <= bound + 1e-12);
        assert!((s.q_filtered - 7.0).abs() < 1e-5);
    }

    #[test]
    fn rate_filter() {
        let mut s = state();
        s.nrt_rate_est = 0.0;
        let v = s.update_nrt_rate(2400, SimTime::ZERO);
        assert!((v - 360_000.0).abs() < 1e-6);
        for i in 0..200 {
            s.update_nrt_rate(2400, TTI * i);
        }
        assert!((s.nrt_rate_est - 1.2e6).abs() < 1.0);
        for i in 0..200 {
            s.update_nrt_rate(0, TTI * i);
        }
        assert!(s.nrt_rate_est < 1e-20);
    }

    #[test]
    fn rate_filter_since_last_opportunity() {
        let mut s = state();
        s.params.rate_normalization = RateNormalization::SinceLastOpportunity;
        s.nrt_rate_est = 0.0;
        s.update_nrt_rate(0, SimTime::ZERO);
        // 2400 bits after 10 ms: 240 kbit/s instantaneous
        let v = s.update_nrt_rate(2400, SimTime::from_millis(10));
        assert!((v - 0.3 * 240_000.0).abs() < 1e-6);
    }

    #[test]
    fn credit_values() {
        let profile = FlowQosProfile::default();
        let th = BufferConfig::default();
        let mut s = state();
        assert!((rt_credits_per_frame(&profile, FRAME_PERIOD) - 2.0).abs() < 1e-12);

        s.q_filtered = 150.0;
        s.nrt_rate_est = 5e6;
        let g = s.compute_credits(&profile, &th, 1000);
        assert_eq!(g, CreditGrant { c_rt: 2, c_nrt: 0 });

        let mut s = state();
        s.q_filtered = 100.0;
        s.nrt_rate_est = 128_000.0;
        let g = s.compute_credits(&profile, &th, 1000);
        assert_eq!(g.c_nrt, 2);

        let mut s = state();
        s.q_filtered = 10.0;
        s.nrt_rate_est = 128_000.0;
        assert_eq!(s.compute_credits(&profile, &th, 1000).c_nrt, 4);
        assert_eq!(s.compute_credits(&profile, &th, 3).c_nrt, 3, "UBS-limited");
    }

    #[test]
    fn fractional_credits_carry() {
        let profile = FlowQosProfile::default();
        let th = BufferConfig::default();
        let mut s = state();
        // 1.5 PDUs per frame
        s.nrt_rate_est = 48_000.0;
        let total: u32 = (0..10)
            .map(|_| s.compute_credits(&profile, &th, 1000).c_nrt)
            .sum();
        assert_eq!(total, 15);
        assert!(s.nrt_carry() >= 0.0 && s.nrt_carry() < 1.0);
    }

    #[test]
    fn ceiling_branches_cover_range() {
        let th = BufferConfig::default();
        let mut prev = f64::INFINITY;
        for i in 0..=1920 {
            let q = f64::from(i) * 0.1;
            let c = nrt_credit_ceiling(1e6, 320, FRAME_PERIOD, 0.5, q, &th);
            let expected = if q < 72.0 {
                31.25
            } else if q <= 144.0 {
                15.625
            } else {
                0.0
            };
            assert_eq!(c, expected, "q̄={q}");
            assert!(c <= prev);
            prev = c;
        }
    }

    #[test]
    fn headroom() {
        let th = BufferConfig::default();
        assert_eq!(nrt_headroom(&th, 0, 0, 0, 0), 160);
        assert_eq!(nrt_headroom(&th, 10, 100, 2, 20), 192 - 10 - 100 - 2 - 20 - 20);
        assert_eq!(nrt_headroom(&th, 32, 200, 0, 0), 0);
    }

    #[test]
    fn release() {
        let mut rnc = RncQueue::new();
        for i in 0..5 {
            rnc.push_rt(MacdPdu::new(FlowClass::Rt, i, SimTime::ZERO));
        }
        let f = rnc.release_frame(CreditGrant { c_rt: 2, c_nrt: 0 });
        assert_eq!(f.rt.len(), 2);
        assert!(f.nrt.is_empty());
        assert_eq!(rnc.rt_backlog(), 3);
        assert_eq!(f.rt[0].rlc_seq, 0);
    }
}
