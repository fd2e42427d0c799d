use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use hsdpa_dtsp::config::ScenarioConfig;
use hsdpa_dtsp::sweep::{emit_csv, run_sweep, SweepAxes};

#[derive(Parser)]
#[command(name = "hsdpa-sim", version, about = "HSDPA MAC-hs buffer management simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario or a sweep and write CSV results.
    Run(RunArgs),
    /// Print the effective configuration and exit.
    Config {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration key.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Sweep axis, e.g. `users=1,5,10` or `scheme=cbs,stsp,dtsp`.
    #[arg(long = "sweep", value_name = "AXIS=V1,V2")]
    sweep: Vec<String>,
    /// Use the full default grid (5 loads x 6 scheme settings).
    #[arg(long)]
    grid: bool,
    #[arg(long)]
    reps: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Skip the per-packet playout_delays.csv.
    #[arg(long)]
    no_playout: bool,
}

fn load_config(path: Option<&PathBuf>, sets: &[String]) -> Result<ScenarioConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ScenarioConfig::from_text(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => ScenarioConfig::default(),
    };
    for kv in sets {
        cfg.apply_override(kv).with_context(|| format!("--set {kv}"))?;
    }
    Ok(cfg)
}

fn run(args: RunArgs) -> Result<()> {
    let mut cfg = load_config(args.config.as_ref(), &args.set)?;
    if let Some(r) = args.reps {
        cfg.reps = r;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let mut axes = if args.grid {
        SweepAxes::default_grid()
    } else {
        SweepAxes::default()
    };
    for s in &args.sweep {
        if args.grid {
            // an explicit axis replaces the grid's
            let axis = s.split_once('=').map_or(s.as_str(), |(a, _)| a);
            match axis {
                "users" => axes.users.clear(),
                "scheme" => axes.schemes.clear(),
                "db_ms" => axes.db_ms.clear(),
                _ => {}
            }
        }
        axes.add(s).with_context(|| format!("--sweep {s}"))?;
    }
    let cells = axes.cells(&cfg).len();
    eprintln!(
        "running {cells} cell(s) x {} replication(s), seed {}",
        cfg.reps, cfg.seed
    );
    let records = run_sweep(&cfg, &axes)?;
    emit_csv(&records, &cfg, &axes, &args.out, !args.no_playout)
        .with_context(|| format!("writing results to {}", args.out.display()))?;
    let wall: f64 = records.iter().map(|r| r.wall.as_secs_f64()).sum();
    eprintln!(
        "wrote {} run(s) to {} ({wall:.1} s simulation time across workers)",
        records.len(),
        args.out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Config { config, set } => load_config(config.as_ref(), &set).and_then(|c| {
            c.validate()?;
            print!("{}", c.render());
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
