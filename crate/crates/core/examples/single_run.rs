//! Runs one replication and prints its full metrics.
//!
//! `cargo run --release --example single_run -- users=10 scheme=stsp rep=2`

use hsdpa_dtsp::config::ScenarioConfig;
use hsdpa_dtsp::sim::run_scenario;
use hsdpa_dtsp::sweep::run_seed;

fn main() {
    let mut cfg = ScenarioConfig::default();
    let mut rep = 0;
    for kv in std::env::args().skip(1) {
        if let Some(r) = kv.strip_prefix("rep=") {
            rep = r.parse().unwrap();
            continue;
        }
        cfg.apply_override(&kv).expect("override");
    }
    let mut m = run_scenario(&cfg, run_seed(cfg.seed, cfg.users, rep)).expect("run");
    m.playout.clear();
    println!("{m:#?}");
}
