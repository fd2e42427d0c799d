//! Per-UE radio abstraction: propagation, shadowing, SINR, CQI reporting,
//! AMC selection and HARQ.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::engine::{SimTime, TTI};

#[derive(Debug, Error, PartialEq)]
pub enum RadioError {
    #[error("distance must be positive, got {0} km")]
    NonPositiveDistance(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadioConfig {
    pub node_b_total_power_w: f64,
    pub hs_dsch_power_fraction: f64,
    pub noise_power_w: f64,
    pub path_loss_intercept_db: f64,
    pub path_loss_slope_db: f64,
    pub shadowing_sigma_db: f64,
    /// Distance over which shadowing correlation falls to 1/e.
    pub shadowing_decorrelation_m: f64,
    /// Static users redraw their shadowing this often.
    pub static_resample: SimTime,
    /// Informational only.
    pub carrier_hz: f64,
    pub chip_rate: u64,
    pub spreading_factor: u32,
    pub num_codes: u32,
    pub cqi_latency: SimTime,
    pub harq_feedback_latency: SimTime,
    pub num_harq_processes: usize,
    pub max_harq_transmissions: u32,
    /// Selection threshold of each AMC scheme, in table order.
    pub cqi_thresholds_db: [f64; 6],
    pub bler_target: f64,
    /// SINR increase needed for one decade of BLER improvement.
    pub bler_decade_db: f64,
    pub combining_gain_db: f64,
    /// Adds `10 log10(SF)` to the chip-level SINR, giving the per-symbol
    /// HS-DSCH SINR that CQI selection and decoding see.
    pub despreading_gain: bool,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            node_b_total_power_w: 15.0,
            hs_dsch_power_fraction: 0.5,
            noise_power_w: 1.214e-13,
            path_loss_intercept_db: 148.0,
            path_loss_slope_db: 40.0,
            shadowing_sigma_db: 8.0,
            shadowing_decorrelation_m: 20.0,
            static_resample: SimTime::from_secs(1),
            carrier_hz: 2.0e9,
            chip_rate: 3_840_000,
            spreading_factor: 16,
            num_codes: 5,
            cqi_latency: SimTime::from_millis(6),
            harq_feedback_latency: SimTime::from_millis(5),
            num_harq_processes: 4,
            max_harq_transmissions: 4,
            cqi_thresholds_db: [-2.0, 1.0, 4.0, 7.0, 10.0, 13.0],
            bler_target: 0.1,
            bler_decade_db: 10.0,
            combining_gain_db: 3.0,
            despreading_gain: true,
        }
    }
}

impl RadioConfig {
    pub fn hs_dsch_power_w(&self) -> f64 {
        self.node_b_total_power_w * self.hs_dsch_power_fraction
    }

    /// Modulation symbols carried by one code in one TTI (480 at SF16).
    pub fn symbols_per_tti_per_code(&self) -> u32 {
        (self.chip_rate * TTI.as_micros() / 1_000_000 / u64::from(self.spreading_factor)) as u32
    }

    /// Processing gain applied on top of [`compute_sinr_db`]; 0 when disabled.
    pub fn despreading_gain_db(&self) -> f64 {
        if self.despreading_gain {
            10.0 * f64::from(self.spreading_factor).log10()
        } else {
            0.0
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.node_b_total_power_w > 0.0 && self.noise_power_w > 0.0) {
            return Err("radio powers must be positive".into());
        }
        if !(self.hs_dsch_power_fraction > 0.0 && self.hs_dsch_power_fraction <= 1.0) {
            return Err("radio.hs_power_fraction must lie in (0, 1]".into());
        }
        if self.shadowing_sigma_db < 0.0 {
            return Err("radio.shadow_sigma_db must be non-negative".into());
        }
        if self.shadowing_decorrelation_m <= 0.0 {
            return Err("radio.shadow_decorr_m must be positive".into());
        }
        if self.num_harq_processes == 0 || self.max_harq_transmissions == 0 {
            return Err("HARQ process count and max transmissions must be >= 1".into());
        }
        if self.spreading_factor == 0 || self.num_codes == 0 {
            return Err("spreading factor and code count must be positive".into());
        }
        if self.cqi_thresholds_db.windows(2).any(|w| w[0] > w[1]) {
            return Err("radio.cqi_thresholds must be non-decreasing".into());
        }
        if !(self.bler_target >= 0.0 && self.bler_target < 1.0) || self.bler_decade_db <= 0.0 {
            return Err("BLER curve parameters out of range".into());
        }
        Ok(())
    }
}

/// `intercept + slope * log10(d_km)`.
pub fn path_loss_db(cfg: &RadioConfig, distance_km: f64) -> Result<f64, RadioError> {
    if !(distance_km > 0.0) {
        return Err(RadioError::NonPositiveDistance(distance_km));
    }
    Ok(cfg.path_loss_intercept_db + cfg.path_loss_slope_db * distance_km.log10())
}

/// Received HS-DSCH power over thermal noise; single cell, no interference.
pub fn compute_sinr_db(
    cfg: &RadioConfig,
    distance_km: f64,
    shadowing_db: f64,
) -> Result<f64, RadioError> {
    let loss_db = path_loss_db(cfg, distance_km)? + shadowing_db;
    let rx_w = cfg.hs_dsch_power_w() * 10f64.powf(-loss_db / 10.0);
    Ok(10.0 * (rx_w / cfg.noise_power_w).log10())
}

/// Log-normal shadowing with exponential spatial decorrelation.
#[derive(Debug, Clone, Copy)]
pub struct Shadowing {
    pub sigma_db: f64,
    pub decorrelation_m: f64,
    pub static_resample: SimTime,
}

impl Shadowing {
    pub fn from_config(cfg: &RadioConfig) -> Self {
        Self {
            sigma_db: cfg.shadowing_sigma_db,
            decorrelation_m: cfg.shadowing_decorrelation_m,
            static_resample: cfg.static_resample,
        }
    }

    /// Correlation between samples `elapsed` apart for a user moving at
    /// `speed_mps`. Static users are fully correlated until the resample
    /// period has elapsed, then independent.
    pub fn correlation(&self, elapsed: SimTime, speed_mps: f64) -> f64 {
        if elapsed == SimTime::ZERO {
            1.0
        } else if speed_mps > 0.0 {
            (-speed_mps * elapsed.as_secs_f64() / self.decorrelation_m).exp()
        } else if elapsed >= self.static_resample {
            0.0
        } else {
            1.0
        }
    }

    /// Draws the next shadowing value (dB) given the previous one.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        prev_db: f64,
        elapsed: SimTime,
        speed_mps: f64,
    ) -> f64 {
        let rho = self.correlation(elapsed, speed_mps);
        if rho >= 1.0 {
            return prev_db;
        }
        let z: f64 = rng.sample(StandardNormal);
        rho * prev_db + (1.0 - rho * rho).sqrt() * self.sigma_db * z
    }

    /// An unconditioned draw, used for the first sample of a user.
    pub fn initial<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.sigma_db * z
    }
}

/// Maps SINR to a CQI index 0..=6: the number of scheme thresholds met.
pub fn cqi_from_sinr(thresholds_db: &[f64; 6], sinr_db: f64) -> u8 {
    if sinr_db.is_nan() {
        return 0;
    }
    thresholds_db.iter().filter(|t| sinr_db >= **t).count() as u8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AmcScheme {
    QpskQuarter,
    QpskHalf,
    QpskThreeQuarter,
    Qam16Quarter,
    Qam16Half,
    Qam16ThreeQuarter,
}

impl AmcScheme {
    pub const ALL: [AmcScheme; 6] = [
        AmcScheme::QpskQuarter,
        AmcScheme::QpskHalf,
        AmcScheme::QpskThreeQuarter,
        AmcScheme::Qam16Quarter,
        AmcScheme::Qam16Half,
        AmcScheme::Qam16ThreeQuarter,
    ];

    /// 0-based position in table order; CQI `index + 1` selects it.
    pub fn index(self) -> usize {
        AmcScheme::ALL.iter().position(|s| *s == self).expect("listed")
    }

    pub fn bits_per_symbol(self) -> u32 {
        match self {
            AmcScheme::QpskQuarter | AmcScheme::QpskHalf | AmcScheme::QpskThreeQuarter => 2,
            _ => 4,
        }
    }

    /// Code rate as (numerator, denominator).
    pub fn code_rate(self) -> (u32, u32) {
        match self {
            AmcScheme::QpskQuarter | AmcScheme::Qam16Quarter => (1, 4),
            AmcScheme::QpskHalf | AmcScheme::Qam16Half => (1, 2),
            AmcScheme::QpskThreeQuarter | AmcScheme::Qam16ThreeQuarter => (3, 4),
        }
    }

    pub fn tbs_bits(self, cfg: &RadioConfig) -> u32 {
        let (num, den) = self.code_rate();
        cfg.symbols_per_tti_per_code() * self.bits_per_symbol() * cfg.num_codes * num / den
    }

    pub fn threshold_db(self, cfg: &RadioConfig) -> f64 {
        cfg.cqi_thresholds_db[self.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AmcDecision {
    pub scheme: AmcScheme,
    pub tbs_bits: u32,
}

/// `None` for CQI 0: nothing decodable, no transmission this TTI.
pub fn select_amc(cfg: &RadioConfig, reported_cqi: u8) -> Option<AmcDecision> {
    if reported_cqi == 0 {
        return None;
    }
    let scheme = AmcScheme::ALL[usize::from(reported_cqi.min(6)) - 1];
    Some(AmcDecision {
        scheme,
        tbs_bits: scheme.tbs_bits(cfg),
    })
}

/// First-order BLER curve: `bler_target` at the scheme threshold, one decade
/// better per `bler_decade_db`, with chase-combining gain per retransmission.
pub fn decode_success_probability(
    cfg: &RadioConfig,
    scheme: AmcScheme,
    sinr_db: f64,
    tx_count: u32,
) -> f64 {
    debug_assert!(tx_count >= 1);
    let effective = sinr_db + cfg.combining_gain_db * f64::from(tx_count.saturating_sub(1));
    let margin = effective - scheme.threshold_db(cfg);
    let bler = (cfg.bler_target * 10f64.powf(-margin / cfg.bler_decade_db)).min(1.0);
    1.0 - bler
}

pub fn decode_outcome<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &RadioConfig,
    scheme: AmcScheme,
    sinr_db: f64,
    tx_count: u32,
) -> bool {
    let p = decode_success_probability(cfg, scheme, sinr_db, tx_count);
    rng.random::<f64>() < p
}

/// Per-UE channel: geometry, current shadowing and the CQI report pipeline.
#[derive(Debug, Clone)]
pub struct ChannelState {
    pub initial_distance_km: f64,
    pub speed_kmh: f64,
    pub distance_km: f64,
    pub shadowing_db: f64,
    pub sinr_db: f64,
    last_shadow_update: SimTime,
    last_static_draw: SimTime,
    history: VecDeque<(SimTime, u8)>,
}

impl ChannelState {
    pub fn new(initial_distance_km: f64, speed_kmh: f64, initial_shadow_db: f64) -> Self {
        Self {
            initial_distance_km,
            speed_kmh,
            distance_km: initial_distance_km,
            shadowing_db: initial_shadow_db,
            sinr_db: f64::NAN,
            last_shadow_update: SimTime::ZERO,
            last_static_draw: SimTime::ZERO,
            history: VecDeque::with_capacity(8),
        }
    }

    pub fn speed_mps(&self) -> f64 {
        self.speed_kmh / 3.6
    }

    /// Advances geometry and shadowing to `now`, recomputes SINR and records
    /// the CQI measured at `now`.
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        now: SimTime,
        cfg: &RadioConfig,
        shadowing: &Shadowing,
        rng: &mut R,
    ) -> Result<(), RadioError> {
        self.distance_km =
            self.initial_distance_km + self.speed_kmh * now.as_secs_f64() / 3600.0;
        let speed = self.speed_mps();
        if speed > 0.0 {
            let elapsed = now.saturating_sub(self.last_shadow_update);
            self.shadowing_db = shadowing.sample(rng, self.shadowing_db, elapsed, speed);
            self.last_shadow_update = now;
        } else {
            let elapsed = now.saturating_sub(self.last_static_draw);
            if shadowing.correlation(elapsed, 0.0) < 1.0 {
                self.shadowing_db = shadowing.sample(rng, self.shadowing_db, elapsed, 0.0);
                self.last_static_draw = now;
            }
        }
        self.sinr_db =
            compute_sinr_db(cfg, self.distance_km, self.shadowing_db)? + cfg.despreading_gain_db();
        let cqi = cqi_from_sinr(&cfg.cqi_thresholds_db, self.sinr_db);
        self.history.push_back((now, cqi));
        while self.history.len() > 2 && self.history[1].0 + cfg.cqi_latency <= now {
            self.history.pop_front();
        }
        Ok(())
    }

    /// CQI as seen by the Node B: the measurement taken `cqi_latency` ago.
    /// Zero until the first report has arrived.
    pub fn reported_cqi(&self, now: SimTime, cfg: &RadioConfig) -> u8 {
        self.history
            .iter()
            .rev()
            .find(|(t, _)| *t + cfg.cqi_latency <= now)
            .map_or(0, |(_, c)| *c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HarqState {
    Idle,
    AwaitingFeedback,
    PendingRetransmission,
}

#[derive(Debug, Clone)]
pub struct HarqProcess<P> {
    pub id: usize,
    pub state: HarqState,
    pub payload: Option<P>,
    pub scheme: Option<AmcScheme>,
    pub tx_count: u32,
    decoded: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum HarqOutcome<P> {
    Delivered { payload: P, tx_count: u32 },
    Retransmit,
    Dropped { payload: P, tx_count: u32 },
}

/// Stop-and-wait HARQ processes of one UE.
#[derive(Debug, Clone)]
pub struct HarqEntity<P> {
    processes: Vec<HarqProcess<P>>,
    retx_order: VecDeque<usize>,
    max_transmissions: u32,
}

impl<P> HarqEntity<P> {
    pub fn new(num_processes: usize, max_transmissions: u32) -> Self {
        Self {
            processes: (0..num_processes)
                .map(|id| HarqProcess {
                    id,
                    state: HarqState::Idle,
                    payload: None,
                    scheme: None,
                    tx_count: 0,
                    decoded: false,
                })
                .collect(),
            retx_order: VecDeque::new(),
            max_transmissions,
        }
    }

    pub fn len(&self) -> usize {
        self.processes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.processes.is_empty()
    }

    pub fn process(&self, id: usize) -> &HarqProcess<P> {
        &self.processes[id]
    }

    pub fn idle_process(&self) -> Option<usize> {
        self.processes
            .iter()
            .position(|p| p.state == HarqState::Idle)
    }

    /// Oldest process whose payload was NACKed and awaits retransmission.
    pub fn pending_retransmission(&self) -> Option<usize> {
        self.retx_order.front().copied()
    }

    pub fn busy_count(&self) -> usize {
        self.processes
            .iter()
            .filter(|p| p.state != HarqState::Idle)
            .count()
    }

    /// First transmission of `payload` on idle process `id`. `decoded` is the
    /// receiver's decode result, reported at feedback time.
    pub fn transmit(&mut self, id: usize, payload: P, scheme: AmcScheme, decoded: bool) {
        let p = &mut self.processes[id];
        assert_eq!(
            p.state,
            HarqState::Idle,
            "HARQ transmit on busy process {id}"
        );
        p.state = HarqState::AwaitingFeedback;
        p.payload = Some(payload);
        p.scheme = Some(scheme);
        p.tx_count = 1;
        p.decoded = decoded;
    }

    /// Retransmits the stored payload of process `id`; returns the attempt
    /// number.
    pub fn retransmit(&mut self, id: usize, decoded: bool) -> u32 {
        let p = &mut self.processes[id];
        assert_eq!(
            p.state,
            HarqState::PendingRetransmission,
            "HARQ retransmit on process {id} without pending NACK"
        );
        self.retx_order.retain(|x| *x != id);
        p.state = HarqState::AwaitingFeedback;
        p.tx_count += 1;
        p.decoded = decoded;
        p.tx_count
    }

    /// Applies the ACK/NACK for process `id`.
    pub fn feedback(&mut self, id: usize) -> HarqOutcome<P> {
        let max = self.max_transmissions;
        let p = &mut self.processes[id];
        assert_eq!(p.state, HarqState::AwaitingFeedback);
        if p.decoded {
            p.state = HarqState::Idle;
            p.scheme = None;
            HarqOutcome::Delivered {
                payload: p.payload.take().expect("in flight"),
                tx_count: p.tx_count,
            }
        } else if p.tx_count >= max {
            p.state = HarqState::Idle;
            p.scheme = None;
            HarqOutcome::Dropped {
                payload: p.payload.take().expect("in flight"),
                tx_count: p.tx_count,
            }
        } else {
            p.state = HarqState::PendingRetransmission;
            self.retx_order.push_back(id);
            HarqOutcome::Retransmit
        }
    }
}
