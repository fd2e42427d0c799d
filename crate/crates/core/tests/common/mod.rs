//! Reference MAC-hs buffer: one arrival-ordered list, scanned linearly.
//! Deliberately shares no code with the crate's two-queue implementation.

#![allow(dead_code)]

use hsdpa_dtsp::buffer::{
    BufferConfig, FlowClass, HolBudget, MacdPdu, PriorityConfig, Scheme, Selection, TspBuffer,
};
use hsdpa_dtsp::engine::SimTime;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct Entry {
    pub class: FlowClass,
    pub seq: u64,
    pub arrived: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RefCounters {
    pub rt_drops: u64,
    pub nrt_drops: u64,
    pub discards: u64,
}

#[derive(Debug, Clone)]
pub struct RefBuffer {
    pub scheme: Scheme,
    pub r_max: usize,
    pub n_max: usize,
    pub delta: usize,
    pub hol_limit_us: u64,
    pub dt_us: u64,
    pub list: Vec<Entry>,
    pub counters: RefCounters,
}

impl RefBuffer {
    fn count(&self, class: FlowClass) -> usize {
        self.list.iter().filter(|e| e.class == class).count()
    }

    pub fn admit(&mut self, class: FlowClass, seq: u64, now_us: u64) {
        let total = self.list.len();
        let ok = match (self.scheme, class) {
            (Scheme::Cbs, _) => total < self.n_max,
            (_, FlowClass::Rt) => self.count(FlowClass::Rt) < self.r_max && total < self.n_max,
            (_, FlowClass::Nrt) => total < self.n_max,
        };
        if ok {
            self.list.push(Entry { class, seq, arrived: now_us });
        } else if class == FlowClass::Rt {
            self.counters.rt_drops += 1;
        } else {
            self.counters.nrt_drops += 1;
        }
    }

    pub fn sweep(&mut self, now_us: u64) {
        if self.scheme == Scheme::Cbs {
            return;
        }
        loop {
            let Some(pos) = self.list.iter().position(|e| e.class == FlowClass::Rt) else {
                return;
            };
            if now_us - self.list[pos].arrived >= self.dt_us {
                self.list.remove(pos);
                self.counters.discards += 1;
            } else {
                return;
            }
        }
    }

    pub fn select(&self, now_us: u64) -> Selection {
        let r = self.count(FlowClass::Rt);
        let n = self.count(FlowClass::Nrt);
        let rt_or_nrt = || {
            if r > 0 {
                Selection::Rt
            } else if n > 0 {
                Selection::Nrt
            } else {
                Selection::Empty
            }
        };
        match self.scheme {
            Scheme::Cbs => match self.list.first() {
                None => Selection::Empty,
                Some(e) if e.class == FlowClass::Rt => Selection::Rt,
                Some(_) => Selection::Nrt,
            },
            Scheme::StaticTsp => rt_or_nrt(),
            Scheme::DynamicTsp => {
                let hol = self
                    .list
                    .iter()
                    .find(|e| e.class == FlowClass::Rt)
                    .map_or(0, |e| now_us - e.arrived);
                if r < self.delta && hol < self.hol_limit_us && n > 0 {
                    Selection::Nrt
                } else {
                    rt_or_nrt()
                }
            }
        }
    }

    /// Takes up to `budget` entries of `class`; under CBS only the run of
    /// that class at the very front of the list.
    pub fn take(&mut self, class: FlowClass, budget: usize) -> Vec<u64> {
        let mut out = Vec::new();
        let mut i = 0;
        while out.len() < budget && i < self.list.len() {
            if self.list[i].class == class {
                out.push(self.list.remove(i).seq);
            } else if self.scheme == Scheme::Cbs {
                break;
            } else {
                i += 1;
            }
        }
        out
    }

    pub fn seqs(&self, class: FlowClass) -> Vec<u64> {
        self.list.iter().filter(|e| e.class == class).map(|e| e.seq).collect()
    }
}

/// A random small buffer configuration and the matching pair of buffers.
pub fn random_pair(rng: &mut ChaCha8Rng) -> (TspBuffer, RefBuffer) {
    let scheme = match rng.random_range(0..3) {
        0 => Scheme::Cbs,
        1 => Scheme::StaticTsp,
        _ => Scheme::DynamicTsp,
    };
    let r = rng.random_range(1..8u32);
    let n = r + rng.random_range(3..14u32);
    let cfg = BufferConfig { n, r, l: r + 1, h: r + 2 };
    let dt_ms = rng.random_range(5..60u64);
    let db_max_ms = rng.random_range(5..60u64);
    let db_ms = rng.random_range(0..=db_max_ms);
    let delta = rng.random_range(0..=r);
    let hol_budget = if rng.random_bool(0.5) { HolBudget::DbMax } else { HolBudget::Db };
    let prio = PriorityConfig {
        db: SimTime::from_millis(db_ms),
        db_max: SimTime::from_millis(db_max_ms),
        discard_timeout: SimTime::from_millis(dt_ms),
        delta,
        hol_budget,
    };
    let reference = RefBuffer {
        scheme,
        r_max: r as usize,
        n_max: n as usize,
        delta: delta as usize,
        hol_limit_us: match hol_budget {
            HolBudget::DbMax => db_max_ms * 1000,
            HolBudget::Db => db_ms * 1000,
        },
        dt_us: dt_ms * 1000,
        list: Vec::new(),
        counters: RefCounters::default(),
    };
    (TspBuffer::new(scheme, cfg, prio), reference)
}

/// Runs one random operation sequence through both models; `Err` describes
/// the first divergence.
pub fn run_sequence(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let (mut real, mut model) = random_pair(rng);
    let ops = rng.random_range(1..=50);
    let mut now_us = 0u64;
    let mut seq = 0u64;
    for step in 0..ops {
        now_us += rng.random_range(0..8) * 1000;
        let now = SimTime::from_micros(now_us);
        match rng.random_range(0..10) {
            0..=4 => {
                let class = if rng.random_bool(0.5) { FlowClass::Rt } else { FlowClass::Nrt };
                real.admit(MacdPdu::new(class, seq, now), now);
                model.admit(class, seq, now_us);
                seq += 1;
            }
            5..=7 => {
                let sel = real.select_flow(now);
                let want = model.select(now_us);
                if sel != want {
                    return Err(format!("step {step}: select {sel:?} vs reference {want:?}"));
                }
                if let Some(class) = sel.flow() {
                    let budget = rng.random_range(0..6u32);
                    let got: Vec<u64> = real
                        .dequeue_for_tti(class, budget * 320 + rng.random_range(0..320))
                        .iter()
                        .map(|p| p.rlc_seq)
                        .collect();
                    let want = model.take(class, budget as usize);
                    if got != want {
                        return Err(format!("step {step}: dequeued {got:?} vs reference {want:?}"));
                    }
                }
            }
            _ => {
                real.discard_timer_sweep(now);
                model.sweep(now_us);
            }
        }
        for class in [FlowClass::Rt, FlowClass::Nrt] {
            let got: Vec<u64> = real.iter_class(class).map(|p| p.rlc_seq).collect();
            if got != model.seqs(class) {
                return Err(format!("step {step}: {class:?} contents {got:?} vs {:?}", model.seqs(class)));
            }
        }
        let c = real.counters();
        let rc = &model.counters;
        if (c.rt_admission_drops, c.nrt_admission_drops, c.rt_dt_discards)
            != (rc.rt_drops, rc.nrt_drops, rc.discards)
        {
            return Err(format!("step {step}: counters {c:?} vs {rc:?}"));
        }
        if !real.ledger_balanced() {
            return Err(format!("step {step}: ledger unbalanced"));
        }
    }
    Ok(())
}
