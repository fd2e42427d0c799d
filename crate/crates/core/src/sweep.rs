//! Sweeps over load, scheme and delay budget, and CSV output.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::buffer::Scheme;
use crate::config::{ConfigError, ScenarioConfig};
use crate::engine::derive_seed;
use crate::sim::run_scenario;
use crate::traffic::SimMetrics;

pub const SUMMARY_HEADER: &str = "scheme,db_ms,delta,users,seed,rep,nrt_throughput_bps,rt_discard_ratio,rt_underruns,rt_packets_played,nrt_admission_drops,rt_admission_drops";
pub const PLAYOUT_HEADER: &str = "scheme,db_ms,users,rep,playout_time_s,inter_packet_delay_s";
pub const STATS_HEADER: &str = "scheme,db_ms,delta,users,reps,nrt_throughput_mean,nrt_throughput_std,rt_discard_ratio_mean,rt_discard_ratio_std,rt_underruns_mean,rt_underruns_std";

/// Values swept; an empty axis keeps the base configuration's value.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SweepAxes {
    pub users: Vec<u32>,
    pub schemes: Vec<Scheme>,
    pub db_ms: Vec<u64>,
}

impl SweepAxes {
    /// Five loads crossed with CBS, s-TSP and D-TSP at four delay budgets.
    pub fn default_grid() -> Self {
        Self {
            users: vec![1, 5, 10, 20, 30],
            schemes: vec![Scheme::Cbs, Scheme::StaticTsp, Scheme::DynamicTsp],
            db_ms: vec![40, 80, 120, 160],
        }
    }

    /// Parses one `axis=v1,v2,...` argument into this set of axes.
    pub fn add(&mut self, spec: &str) -> Result<(), ConfigError> {
        let (axis, values) = spec.split_once('=').ok_or_else(|| ConfigError::Malformed {
            line: 0,
            text: spec.to_string(),
        })?;
        let bad = |v: &str| ConfigError::BadValue {
            key: axis.to_string(),
            value: v.to_string(),
            reason: "not a valid sweep value".into(),
        };
        for v in values.split(',').map(str::trim).filter(|v| !v.is_empty()) {
            match axis.trim() {
                "users" => self.users.push(v.parse().map_err(|_| bad(v))?),
                "scheme" => self.schemes.push(Scheme::parse(v).ok_or_else(|| bad(v))?),
                "db_ms" => self.db_ms.push(v.parse().map_err(|_| bad(v))?),
                other => return Err(ConfigError::UnknownKey(other.to_string())),
            }
        }
        Ok(())
    }

    /// Cell configurations in output order: users, then scheme, then budget.
    /// Schemes without priority switching get one cell per load.
    pub fn cells(&self, base: &ScenarioConfig) -> Vec<ScenarioConfig> {
        let users = if self.users.is_empty() {
            vec![base.users]
        } else {
            self.users.clone()
        };
        let schemes = if self.schemes.is_empty() {
            vec![base.scheme]
        } else {
            self.schemes.clone()
        };
        let dbs = if self.db_ms.is_empty() {
            vec![base.db_ms]
        } else {
            self.db_ms.clone()
        };
        let mut out = Vec::new();
        for &u in &users {
            for &s in &schemes {
                let budgets: &[u64] = if s == Scheme::DynamicTsp { &dbs } else { &dbs[..1] };
                for &db in budgets {
                    let mut c = base.clone();
                    c.users = u;
                    c.scheme = s;
                    c.db_ms = db;
                    out.push(c);
                }
            }
        }
        out
    }
}

/// Seed of one replication. Depends on the load and replication only, so
/// every scheme at a given load sees the same channel and placement draws.
pub fn run_seed(master: u64, users: u32, rep: u32) -> u64 {
    derive_seed(&[master, u64::from(users), u64::from(rep)])
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub scheme: Scheme,
    pub db_ms: u64,
    pub delta: u32,
    pub users: u32,
    pub rep: u32,
    pub seed: u64,
    pub config_hash: u64,
    pub metrics: SimMetrics,
    pub wall: Duration,
}

impl RunRecord {
    pub fn summary_row(&self) -> String {
        let m = &self.metrics;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.scheme.as_str(),
            self.db_ms,
            self.delta,
            self.users,
            self.seed,
            self.rep,
            m.nrt_throughput_bps,
            m.rt_discard_ratio,
            m.rt_underruns,
            m.rt_packets_played,
            m.nrt_admission_drops,
            m.rt_admission_drops
        )
    }
}

/// Runs every cell `base.reps` times in parallel; output order follows
/// [`SweepAxes::cells`] then replication.
pub fn run_sweep(base: &ScenarioConfig, axes: &SweepAxes) -> Result<Vec<RunRecord>, ConfigError> {
    let cells = axes.cells(base);
    for c in &cells {
        c.validate()?;
    }
    let jobs: Vec<(ScenarioConfig, u32)> = cells
        .into_iter()
        .flat_map(|c| (0..base.reps).map(move |r| (c.clone(), r)))
        .collect();
    jobs.into_par_iter()
        .map(|(cfg, rep)| {
            let seed = run_seed(cfg.seed, cfg.users, rep);
            let t0 = Instant::now();
            let metrics = run_scenario(&cfg, seed)?;
            Ok(RunRecord {
                scheme: cfg.scheme,
                db_ms: cfg.reported_db_ms(),
                delta: cfg.reported_delta(),
                users: cfg.users,
                rep,
                seed,
                config_hash: cfg.hash(),
                metrics,
                wall: t0.elapsed(),
            })
        })
        .collect()
}

pub fn summary_csv(records: &[RunRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 96 + 128);
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.summary_row());
        out.push('\n');
    }
    out
}

pub fn write_playout_csv(records: &[RunRecord], w: &mut impl io::Write) -> io::Result<()> {
    writeln!(w, "{PLAYOUT_HEADER}")?;
    for r in records {
        let prefix = format!("{},{},{},{}", r.scheme.as_str(), r.db_ms, r.users, r.rep);
        for (at, gap) in &r.metrics.playout {
            writeln!(w, "{prefix},{},{}", at.to_secs_string(), gap.to_secs_string())?;
        }
    }
    Ok(())
}

/// Mean and sample standard deviation; std is 0 for a single value.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-cell aggregates over replications, in first-appearance order.
pub fn stats_csv(records: &[RunRecord]) -> String {
    let mut keys: Vec<(Scheme, u64, u32, u32)> = Vec::new();
    for r in records {
        let k = (r.scheme, r.db_ms, r.delta, r.users);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let mut out = String::new();
    out.push_str(STATS_HEADER);
    out.push('\n');
    for k in keys {
        let rows: Vec<&RunRecord> = records
            .iter()
            .filter(|r| (r.scheme, r.db_ms, r.delta, r.users) == k)
            .collect();
        let col = |f: fn(&SimMetrics) -> f64| mean_std(&rows.iter().map(|r| f(&r.metrics)).collect::<Vec<_>>());
        let (tm, ts) = col(|m| m.nrt_throughput_bps);
        let (dm, ds) = col(|m| m.rt_discard_ratio);
        let (um, us) = col(|m| m.rt_underruns as f64);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{tm},{ts},{dm},{ds},{um},{us}",
            k.0.as_str(),
            k.1,
            k.2,
            k.3,
            rows.len()
        );
    }
    out
}

/// Writes `summary.csv`, `summary_stats.csv`, `effective_config.txt` and,
/// if requested, `playout_delays.csv` into `dir`.
pub fn emit_csv(
    records: &[RunRecord],
    base: &ScenarioConfig,
    axes: &SweepAxes,
    dir: &Path,
    with_playout: bool,
) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("summary.csv"), summary_csv(records))?;
    fs::write(dir.join("summary_stats.csv"), stats_csv(records))?;
    let mut eff = base.render();
    let join = |v: Vec<String>| v.join(",");
    if !axes.users.is_empty() {
        let _ = writeln!(eff, "# sweep: users = {}", join(axes.users.iter().map(|x| x.to_string()).collect()));
    }
    if !axes.schemes.is_empty() {
        let _ = writeln!(eff, "# sweep: scheme = {}", join(axes.schemes.iter().map(|s| s.as_str().to_string()).collect()));
    }
    if !axes.db_ms.is_empty() {
        let _ = writeln!(eff, "# sweep: db_ms = {}", join(axes.db_ms.iter().map(|x| x.to_string()).collect()));
    }
    fs::write(dir.join("effective_config.txt"), eff)?;
    if with_playout {
        let f = fs::File::create(dir.join("playout_delays.csv"))?;
        let mut w = io::BufWriter::new(f);
        write_playout_csv(records, &mut w)?;
        io::Write::flush(&mut w)?;
    }
    Ok(())
}
