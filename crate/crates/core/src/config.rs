//! Scenario configuration: defaults, the flat `key = value` format, command
//! line overrides, validation and the effective-config echo.

use std::fmt::Write as _;

use thiserror::Error;

use crate::buffer::{BufferConfig, HolBudget, PriorityConfig, Scheme, PDU_SIZE_BITS};
use crate::engine::{fnv1a, SimTime};
use crate::flow_control::{FlowControlParams, FlowQosProfile, RateNormalization};
use crate::radio::RadioConfig;
use crate::rlc::RlcConfig;
use crate::traffic::TcpConfig;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Malformed { line: usize, text: String },
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for `{key}`: {reason}")]
    BadValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Fixed one-way latencies outside the radio link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delays {
    pub iub: SimTime,
    /// External network plus core network, each direction.
    pub core: SimTime,
    /// Radio and Iub return leg of a TCP ACK.
    pub uplink_radio: SimTime,
    pub rlc_status: SimTime,
    pub reorder_timeout: SimTime,
}

impl Default for Delays {
    fn default() -> Self {
        Self {
            iub: SimTime::from_millis(20),
            core: SimTime::from_millis(70),
            uplink_radio: SimTime::from_millis(10),
            rlc_status: SimTime::from_millis(5),
            reorder_timeout: SimTime::from_millis(100),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub users: u32,
    pub scheme: Scheme,
    pub db_ms: u64,
    pub session: SimTime,
    pub seed: u64,
    pub reps: u32,
    pub buffer: BufferConfig,
    pub db_max: SimTime,
    pub discard_timeout: SimTime,
    pub hol_budget: HolBudget,
    pub radio: RadioConfig,
    pub rlc: RlcConfig,
    pub tcp: TcpConfig,
    pub flow_control: FlowControlParams,
    pub qos: FlowQosProfile,
    pub delays: Delays,
    pub playout_buffering: SimTime,
    pub test_ue_distance_km: f64,
    pub test_ue_speed_kmh: f64,
    pub background_min_km: f64,
    pub background_max_km: f64,
    pub mac_hs_header_bits: u32,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            users: 1,
            scheme: Scheme::DynamicTsp,
            db_ms: 160,
            session: SimTime::from_secs(120),
            seed: 1,
            reps: 5,
            buffer: BufferConfig::default(),
            db_max: SimTime::from_millis(160),
            discard_timeout: SimTime::from_millis(160),
            hol_budget: HolBudget::DbMax,
            radio: RadioConfig::default(),
            rlc: RlcConfig::default(),
            tcp: TcpConfig::default(),
            flow_control: FlowControlParams::default(),
            qos: FlowQosProfile::default(),
            delays: Delays::default(),
            playout_buffering: SimTime::from_millis(160),
            test_ue_distance_km: 0.2,
            test_ue_speed_kmh: 3.0,
            background_min_km: 0.1,
            background_max_km: 1.0,
            mac_hs_header_bits: 21,
        }
    }
}

/// Milliseconds with up to three decimals, parsed exactly into microseconds.
pub fn parse_ms(s: &str) -> Option<SimTime> {
    let s = s.trim();
    let (whole, frac) = match s.split_once('.') {
        Some((w, f)) => (w, f),
        None => (s, ""),
    };
    if whole.is_empty() && frac.is_empty() || frac.len() > 3 {
        return None;
    }
    if !whole.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let w: u64 = if whole.is_empty() { 0 } else { whole.parse().ok()? };
    let f: u64 = if frac.is_empty() {
        0
    } else {
        format!("{frac:0<3}").parse().ok()?
    };
    Some(SimTime::from_micros(w.checked_mul(1000)?.checked_add(f)?))
}

pub fn format_ms(t: SimTime) -> String {
    let us = t.as_micros();
    if us % 1000 == 0 {
        (us / 1000).to_string()
    } else {
        let s = format!("{}.{:03}", us / 1000, us % 1000);
        s.trim_end_matches('0').to_string()
    }
}

fn bad(key: &str, value: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.into(),
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .trim()
        .parse()
        .map_err(|_| bad(key, value, "not a number of the expected kind"))
}

fn ms(key: &str, value: &str) -> Result<SimTime, ConfigError> {
    parse_ms(value).ok_or_else(|| bad(key, value, "expected milliseconds"))
}

fn boolean(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(bad(key, value, "expected true or false")),
    }
}

impl ScenarioConfig {
    /// Parses a config file body on top of the defaults.
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Applies `key = value` lines. A line may also hold several
    /// whitespace-separated `key=value` tokens.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let malformed = || ConfigError::Malformed {
                line: i + 1,
                text: raw.to_string(),
            };
            if line.matches('=').count() == 1 {
                let (k, v) = line.split_once('=').ok_or_else(malformed)?;
                if k.trim().is_empty() || v.trim().is_empty() {
                    return Err(malformed());
                }
                self.set(k.trim(), v.trim())?;
            } else {
                for token in line.split_whitespace() {
                    let (k, v) = token.split_once('=').ok_or_else(malformed)?;
                    if k.is_empty() || v.is_empty() {
                        return Err(malformed());
                    }
                    self.set(k, v)?;
                }
            }
        }
        Ok(())
    }

    /// Applies one `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<(), ConfigError> {
        let (k, v) = kv.split_once('=').ok_or_else(|| ConfigError::Malformed {
            line: 0,
            text: kv.to_string(),
        })?;
        self.set(k.trim(), v.trim())
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        match key {
            "users" => self.users = num(key, v)?,
            "scheme" => {
                self.scheme = Scheme::parse(v).ok_or_else(|| bad(key, v, "expected cbs, stsp or dtsp"))?
            }
            "db_ms" => self.db_ms = num(key, v)?,
            "session_s" => self.session = SimTime::from_secs(num(key, v)?),
            "seed" => self.seed = num(key, v)?,
            "reps" => self.reps = num(key, v)?,

            "buffer.N" => self.buffer.n = num(key, v)?,
            "buffer.R" => self.buffer.r = num(key, v)?,
            "buffer.L" => self.buffer.l = num(key, v)?,
            "buffer.H" => self.buffer.h = num(key, v)?,
            "buffer.db_max_ms" => self.db_max = ms(key, v)?,
            "buffer.dt_ms" => self.discard_timeout = ms(key, v)?,
            "buffer.hol_budget" => {
                self.hol_budget = match v.to_ascii_lowercase().as_str() {
                    "db_max" => HolBudget::DbMax,
                    "db" => HolBudget::Db,
                    _ => return Err(bad(key, v, "expected db_max or db")),
                }
            }

            "radio.total_power_w" => self.radio.node_b_total_power_w = num(key, v)?,
            "radio.hs_power_fraction" => self.radio.hs_dsch_power_fraction = num(key, v)?,
            "radio.noise_w" => self.radio.noise_power_w = num(key, v)?,
            "radio.pl_intercept_db" => self.radio.path_loss_intercept_db = num(key, v)?,
            "radio.pl_slope_db" => self.radio.path_loss_slope_db = num(key, v)?,
            "radio.shadow_sigma_db" => self.radio.shadowing_sigma_db = num(key, v)?,
            "radio.shadow_decorr_m" => self.radio.shadowing_decorrelation_m = num(key, v)?,
            "radio.static_resample_ms" => self.radio.static_resample = ms(key, v)?,
            "radio.carrier_hz" => self.radio.carrier_hz = num(key, v)?,
            "radio.chip_rate" => self.radio.chip_rate = num(key, v)?,
            "radio.spreading_factor" => self.radio.spreading_factor = num(key, v)?,
            "radio.codes" => self.radio.num_codes = num(key, v)?,
            "radio.cqi_latency_ms" => self.radio.cqi_latency = ms(key, v)?,
            "radio.harq_feedback_ms" => self.radio.harq_feedback_latency = ms(key, v)?,
            "radio.harq_processes" => self.radio.num_harq_processes = num(key, v)?,
            "radio.harq_max_tx" => self.radio.max_harq_transmissions = num(key, v)?,
            "radio.cqi_thresholds" => {
                let parts: Vec<&str> = v.split(',').collect();
                if parts.len() != 6 {
                    return Err(bad(key, v, "expected six comma-separated dB values"));
                }
                for (slot, p) in self.radio.cqi_thresholds_db.iter_mut().zip(parts) {
                    *slot = num(key, p)?;
                }
            }
            "radio.bler_target" => self.radio.bler_target = num(key, v)?,
            "radio.bler_decade_db" => self.radio.bler_decade_db = num(key, v)?,
            "radio.combining_gain_db" => self.radio.combining_gain_db = num(key, v)?,
            "radio.despreading_gain" => self.radio.despreading_gain = boolean(key, v)?,

            "rlc.pdu_bits" => self.rlc.pdu_size_bits = num(key, v)?,
            "rlc.tx_window" => self.rlc.tx_window = num(key, v)?,
            "rlc.rx_window" => self.rlc.rx_window = num(key, v)?,
            "rlc.max_dat" => self.rlc.max_dat = num(key, v)?,
            "rlc.retx_delay_ms" => self.rlc.retransmission_delay = ms(key, v)?,
            "rlc.status_nacks" => self.rlc.max_status_nacks = num(key, v)?,

            "tcp.mss" => self.tcp.mss_bytes = num(key, v)?,
            "tcp.rwnd" => self.tcp.rwnd_bytes = num(key, v)?,
            "tcp.initial_cwnd_mss" => self.tcp.initial_cwnd_mss = num(key, v)?,
            "tcp.initial_ssthresh" => {
                self.tcp.initial_ssthresh_bytes = if v.eq_ignore_ascii_case("rwnd") {
                    None
                } else {
                    Some(num(key, v)?)
                }
            }
            "tcp.dupacks" => self.tcp.dupack_threshold = num(key, v)?,
            "tcp.initial_rto_ms" => self.tcp.initial_rto = ms(key, v)?,
            "tcp.min_rto_ms" => self.tcp.min_rto = ms(key, v)?,
            "tcp.max_rto_ms" => self.tcp.max_rto = ms(key, v)?,
            "tcp.granularity_ms" => self.tcp.clock_granularity = ms(key, v)?,

            "fc.w" => self.flow_control.w = num(key, v)?,
            "fc.alpha" => self.flow_control.alpha = num(key, v)?,
            "fc.k" => self.flow_control.k = num(key, v)?,
            "fc.frame_ms" => self.flow_control.frame_period = ms(key, v)?,
            "fc.rate_normalization" => {
                self.flow_control.rate_normalization = match v.to_ascii_lowercase().as_str() {
                    "tti" => RateNormalization::Tti,
                    "opportunity" => RateNormalization::SinceLastOpportunity,
                    _ => return Err(bad(key, v, "expected tti or opportunity")),
                }
            }
            "fc.headroom_cap" => self.flow_control.headroom_cap = boolean(key, v)?,
            "qos.lambda_rt_bps" => self.qos.lambda_rt_bps = num(key, v)?,
            "qos.nrt_max_bps" => self.qos.nrt_max_bitrate_bps = num(key, v)?,

            "delay.iub_ms" => self.delays.iub = ms(key, v)?,
            "delay.core_ms" => self.delays.core = ms(key, v)?,
            "delay.uplink_radio_ms" => self.delays.uplink_radio = ms(key, v)?,
            "delay.rlc_status_ms" => self.delays.rlc_status = ms(key, v)?,
            "delay.reorder_ms" => self.delays.reorder_timeout = ms(key, v)?,
            "playout.buffering_ms" => self.playout_buffering = ms(key, v)?,

            "ue.distance_km" => self.test_ue_distance_km = num(key, v)?,
            "ue.speed_kmh" => self.test_ue_speed_kmh = num(key, v)?,
            "background.min_km" => self.background_min_km = num(key, v)?,
            "background.max_km" => self.background_max_km = num(key, v)?,
            "mac.header_bits" => self.mac_hs_header_bits = num(key, v)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Every key with its effective value, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let r = &self.radio;
        let th = r
            .cqi_thresholds_db
            .iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(",");
        vec![
            ("users", self.users.to_string()),
            ("scheme", self.scheme.as_str().to_string()),
            ("db_ms", self.db_ms.to_string()),
            ("session_s", (self.session.as_micros() / 1_000_000).to_string()),
            ("seed", self.seed.to_string()),
            ("reps", self.reps.to_string()),
            ("buffer.N", self.buffer.n.to_string()),
            ("buffer.R", self.buffer.r.to_string()),
            ("buffer.L", self.buffer.l.to_string()),
            ("buffer.H", self.buffer.h.to_string()),
            ("buffer.db_max_ms", format_ms(self.db_max)),
            ("buffer.dt_ms", format_ms(self.discard_timeout)),
            (
                "buffer.hol_budget",
                match self.hol_budget {
                    HolBudget::DbMax => "db_max",
                    HolBudget::Db => "db",
                }
                .to_string(),
            ),
            ("radio.total_power_w", r.node_b_total_power_w.to_string()),
            ("radio.hs_power_fraction", r.hs_dsch_power_fraction.to_string()),
            ("radio.noise_w", r.noise_power_w.to_string()),
            ("radio.pl_intercept_db", r.path_loss_intercept_db.to_string()),
            ("radio.pl_slope_db", r.path_loss_slope_db.to_string()),
            ("radio.shadow_sigma_db", r.shadowing_sigma_db.to_string()),
            ("radio.shadow_decorr_m", r.shadowing_decorrelation_m.to_string()),
            ("radio.static_resample_ms", format_ms(r.static_resample)),
            ("radio.carrier_hz", r.carrier_hz.to_string()),
            ("radio.chip_rate", r.chip_rate.to_string()),
            ("radio.spreading_factor", r.spreading_factor.to_string()),
            ("radio.codes", r.num_codes.to_string()),
            ("radio.cqi_latency_ms", format_ms(r.cqi_latency)),
            ("radio.harq_feedback_ms", format_ms(r.harq_feedback_latency)),
            ("radio.harq_processes", r.num_harq_processes.to_string()),
            ("radio.harq_max_tx", r.max_harq_transmissions.to_string()),
            ("radio.cqi_thresholds", th),
            ("radio.bler_target", r.bler_target.to_string()),
            ("radio.bler_decade_db", r.bler_decade_db.to_string()),
            ("radio.combining_gain_db", r.combining_gain_db.to_string()),
            ("radio.despreading_gain", r.despreading_gain.to_string()),
            ("rlc.pdu_bits", self.rlc.pdu_size_bits.to_string()),
            ("rlc.tx_window", self.rlc.tx_window.to_string()),
            ("rlc.rx_window", self.rlc.rx_window.to_string()),
            ("rlc.max_dat", self.rlc.max_dat.to_string()),
            ("rlc.retx_delay_ms", format_ms(self.rlc.retransmission_delay)),
            ("rlc.status_nacks", self.rlc.max_status_nacks.to_string()),
            ("tcp.mss", self.tcp.mss_bytes.to_string()),
            ("tcp.rwnd", self.tcp.rwnd_bytes.to_string()),
            ("tcp.initial_cwnd_mss", self.tcp.initial_cwnd_mss.to_string()),
            (
                "tcp.initial_ssthresh",
                self.tcp
                    .initial_ssthresh_bytes
                    .map_or("rwnd".to_string(), |b| b.to_string()),
            ),
            ("tcp.dupacks", self.tcp.dupack_threshold.to_string()),
            ("tcp.initial_rto_ms", format_ms(self.tcp.initial_rto)),
            ("tcp.min_rto_ms", format_ms(self.tcp.min_rto)),
            ("tcp.max_rto_ms", format_ms(self.tcp.max_rto)),
            ("tcp.granularity_ms", format_ms(self.tcp.clock_granularity)),
            ("fc.w", self.flow_control.w.to_string()),
            ("fc.alpha", self.flow_control.alpha.to_string()),
            ("fc.k", self.flow_control.k.to_string()),
            ("fc.frame_ms", format_ms(self.flow_control.frame_period)),
            (
                "fc.rate_normalization",
                match self.flow_control.rate_normalization {
                    RateNormalization::Tti => "tti",
                    RateNormalization::SinceLastOpportunity => "opportunity",
                }
                .to_string(),
            ),
            ("fc.headroom_cap", self.flow_control.headroom_cap.to_string()),
            ("qos.lambda_rt_bps", self.qos.lambda_rt_bps.to_string()),
            ("qos.nrt_max_bps", self.qos.nrt_max_bitrate_bps.to_string()),
            ("delay.iub_ms", format_ms(self.delays.iub)),
            ("delay.core_ms", format_ms(self.delays.core)),
            ("delay.uplink_radio_ms", format_ms(self.delays.uplink_radio)),
            ("delay.rlc_status_ms", format_ms(self.delays.rlc_status)),
            ("delay.reorder_ms", format_ms(self.delays.reorder_timeout)),
            ("playout.buffering_ms", format_ms(self.playout_buffering)),
            ("ue.distance_km", self.test_ue_distance_km.to_string()),
            ("ue.speed_kmh", self.test_ue_speed_kmh.to_string()),
            ("background.min_km", self.background_min_km.to_string()),
            ("background.max_km", self.background_max_km.to_string()),
            ("mac.header_bits", self.mac_hs_header_bits.to_string()),
        ]
    }

    /// The effective configuration as a config file, plus derived values as
    /// comments.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        let p = self.priority();
        let _ = writeln!(out, "# derived: delta = {}", p.delta);
        let _ = writeln!(out, "# derived: config_hash = {:016x}", self.hash());
        out
    }

    /// Hash of the full effective configuration.
    pub fn hash(&self) -> u64 {
        let mut body = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(body, "{k}={v}");
        }
        fnv1a(body.as_bytes())
    }

    /// Switching threshold, delay budget and discard timer for this scenario.
    pub fn priority(&self) -> PriorityConfig {
        let mut p = PriorityConfig::new(
            SimTime::from_millis(self.db_ms),
            self.db_max,
            self.discard_timeout,
            PDU_SIZE_BITS,
            self.qos.lambda_rt_bps,
        );
        p.hol_budget = self.hol_budget;
        p
    }

    /// `delta` as reported: zero for schemes without priority switching.
    pub fn reported_delta(&self) -> u32 {
        match self.scheme {
            Scheme::DynamicTsp => self.priority().delta,
            _ => 0,
        }
    }

    /// `db_ms` as reported: zero for schemes without priority switching.
    pub fn reported_db_ms(&self) -> u64 {
        match self.scheme {
            Scheme::DynamicTsp => self.db_ms,
            _ => 0,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let inv = |m: String| Err(ConfigError::Invalid(m));
        if self.users == 0 {
            return inv("users must be >= 1".into());
        }
        if self.session == SimTime::ZERO {
            return inv("session_s must be positive".into());
        }
        if self.reps == 0 {
            return inv("reps must be >= 1".into());
        }
        self.buffer
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.discard_timeout == SimTime::ZERO {
            return inv("buffer.dt_ms must be positive".into());
        }
        self.priority()
            .validate(&self.buffer)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.radio.validate().map_err(ConfigError::Invalid)?;
        self.rlc.validate().map_err(ConfigError::Invalid)?;
        self.tcp.validate().map_err(ConfigError::Invalid)?;
        let fc = &self.flow_control;
        if !(0.0..1.0).contains(&fc.w) || !(0.0..1.0).contains(&fc.alpha) {
            return inv("fc.w and fc.alpha must lie in [0, 1)".into());
        }
        if !(0.0..=1.0).contains(&fc.k) {
            return inv("fc.k must lie in [0, 1]".into());
        }
        if fc.frame_period == SimTime::ZERO {
            return inv("fc.frame_ms must be positive".into());
        }
        if self.qos.lambda_rt_bps == 0 || self.qos.pdu_size_bits != PDU_SIZE_BITS {
            return inv("qos.lambda_rt_bps must be positive".into());
        }
        if u64::from(PDU_SIZE_BITS) * 1_000_000 % self.qos.lambda_rt_bps != 0 {
            return inv("RT packet interval must be a whole number of microseconds".into());
        }
        if !(self.test_ue_distance_km > 0.0) || !(self.test_ue_speed_kmh >= 0.0) {
            return inv("ue.distance_km must be positive and ue.speed_kmh non-negative".into());
        }
        if !(self.background_min_km > 0.0 && self.background_min_km <= self.background_max_km) {
            return inv("background ring needs 0 < min_km <= max_km".into());
        }
        let smallest_tbs = crate::radio::AmcScheme::ALL
            .iter()
            .map(|s| s.tbs_bits(&self.radio))
            .min()
            .unwrap_or(0);
        if self.mac_hs_header_bits + PDU_SIZE_BITS > smallest_tbs {
            return inv("smallest transport block cannot carry one PDU".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = ScenarioConfig::from_text("").unwrap();
        assert_eq!(c, ScenarioConfig::default());
        c.validate().unwrap();
        let text = c.render();
        for line in [
            "buffer.N = 192",
            "buffer.R = 32",
            "buffer.L = 72",
            "buffer.H = 144",
            "buffer.db_max_ms = 160",
            "buffer.dt_ms = 160",
            "radio.total_power_w = 15",
            "radio.hs_power_fraction = 0.5",
            "radio.noise_w = 0.0000000000001214",
            "radio.pl_intercept_db = 148",
            "radio.shadow_sigma_db = 8",
            "radio.cqi_latency_ms = 6",
            "radio.harq_feedback_ms = 5",
            "radio.harq_processes = 4",
            "radio.codes = 5",
            "rlc.max_dat = 6",
            "rlc.retx_delay_ms = 200",
            "tcp.mss = 512",
            "tcp.rwnd = 32768",
            "tcp.initial_cwnd_mss = 1",
            "tcp.initial_ssthresh = rwnd",
            "tcp.dupacks = 3",
            "fc.w = 0.7",
            "fc.alpha = 0.7",
            "fc.k = 0.5",
            "delay.iub_ms = 20",
            "delay.core_ms = 70",
            "session_s = 120",
        ] {
            assert!(text.lines().any(|l| l == line), "missing `{line}`");
        }
    }

    #[test]
    fn db_maps_to_delta() {
        let c = ScenarioConfig::from_text("scheme=DTSP db_ms=120").unwrap();
        assert_eq!(c.scheme, Scheme::DynamicTsp);
        assert_eq!(c.priority().delta, 24);
        for (db, d) in [(0, 0), (40, 8), (80, 16), (120, 24), (160, 32)] {
            let mut c = ScenarioConfig::default();
            c.set("db_ms", &db.to_string()).unwrap();
            assert_eq!(c.priority().delta, d);
            c.validate().unwrap();
        }
    }

    #[test]
    fn threshold_order_rejected() {
        let c = ScenarioConfig::from_text("buffer.L=200\nbuffer.H=144\n").unwrap();
        assert!(matches!(c.validate(), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn unknown_and_malformed_rejected() {
        assert_eq!(
            ScenarioConfig::from_text("bogus = 1"),
            Err(ConfigError::UnknownKey("bogus".into()))
        );
        assert!(matches!(
            ScenarioConfig::from_text("users"),
            Err(ConfigError::Malformed { line: 1, .. })
        ));
        assert!(matches!(
            ScenarioConfig::from_text("users = many"),
            Err(ConfigError::BadValue { .. })
        ));
        assert!(matches!(
            ScenarioConfig::from_text("scheme = pbs"),
            Err(ConfigError::BadValue { .. })
        ));
    }

    #[test]
    fn comments_and_dotted_keys() {
        let c = ScenarioConfig::from_text(
            "# header\nbuffer.N = 200   # bigger\n\n  users = 10\nradio.cqi_thresholds = -3,0,3,6,9,12\n",
        )
        .unwrap();
        assert_eq!(c.buffer.n, 200);
        assert_eq!(c.users, 10);
        assert_eq!(c.radio.cqi_thresholds_db[0], -3.0);
    }

    #[test]
    fn render_round_trips() {
        let mut c = ScenarioConfig::default();
        c.apply_override("radio.cqi_latency_ms=6.5").unwrap();
        c.apply_override("tcp.initial_ssthresh=4096").unwrap();
        c.apply_override("fc.rate_normalization=opportunity").unwrap();
        let back = ScenarioConfig::from_text(&c.render()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn every_echoed_key_is_settable() {
        let mut c = ScenarioConfig::default();
        for (k, v) in ScenarioConfig::default().entries() {
            c.set(k, &v).unwrap();
        }
        assert_eq!(c, ScenarioConfig::default());
    }

    #[test]
    fn hash_tracks_changes() {
        let a = ScenarioConfig::default();
        let mut b = a.clone();
        b.seed = 2;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), ScenarioConfig::default().hash());
    }

    #[test]
    fn millisecond_parsing() {
        assert_eq!(parse_ms("6"), Some(SimTime::from_micros(6000)));
        assert_eq!(parse_ms("0.5"), Some(SimTime::from_micros(500)));
        assert_eq!(parse_ms("159.999"), Some(SimTime::from_micros(159_999)));
        assert_eq!(parse_ms("1.0001"), None);
        assert_eq!(parse_ms("-1"), None);
        assert_eq!(parse_ms(""), None);
        assert_eq!(format_ms(SimTime::from_micros(6500)), "6.5");
        assert_eq!(format_ms(SimTime::from_micros(159_999)), "159.999");
    }

    #[test]
    fn db_above_max_rejected() {
        let c = ScenarioConfig::from_text("db_ms = 200").unwrap();
        assert!(c.validate().is_err());
    }
}
