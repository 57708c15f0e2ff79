use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use taskmarket::bench::{run_bench, write_bench_csv, BenchSpec};
use taskmarket::bridge::Bridge;
use taskmarket::logs::write_logs;
use taskmarket::run::{drive, RunOptions};
use taskmarket::load_scenario;
use taskmarket_core::World;

const EXIT_INCOMPLETE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "taskmarket", version, about = "Auction-based multi-robot task allocation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run a scenario file.
    Run {
        scenario: PathBuf,
        /// Overrides the seed in the scenario file.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for metrics.csv, rounds.csv and events.jsonl.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Serve the operator bridge on this port (implies --realtime).
        #[arg(long)]
        serve: Option<u16>,
        /// Pace simulated time to wall time.
        #[arg(long)]
        realtime: bool,
        /// Wall-time speed-up for --realtime.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
    },
    /// Time the assignment solver over a sweep of synthetic instances.
    Bench {
        /// Comma-separated agent counts.
        #[arg(long)]
        agents: String,
        /// Comma-separated task counts.
        #[arg(long)]
        tasks: String,
        /// Comma-separated participation fractions in (0, 1].
        #[arg(long)]
        participation: String,
        #[arg(long, default_value_t = 11)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_list<T: std::str::FromStr>(name: &str, raw: &str) -> Result<Vec<T>, String> {
    let items: Vec<&str> = raw.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(format!("--{name} needs at least one value"));
    }
    items
        .iter()
        .map(|s| s.parse().map_err(|_| format!("--{name}: cannot parse {s:?}")))
        .collect()
}

fn run_cmd(scenario: PathBuf, seed: Option<u64>, log: Option<PathBuf>, serve: Option<u16>, realtime: bool, speed: f64) -> ExitCode {
    let loaded = match load_scenario(&scenario, seed) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if !(speed.is_finite() && speed > 0.0) {
        eprintln!("error: --speed must be positive");
        return ExitCode::from(EXIT_CONFIG);
    }
    let world = match World::new(loaded.config) {
        Ok(w) => w,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let bridge = match serve.map(|port| Bridge::bind(("0.0.0.0", port))).transpose() {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: cannot serve the operator bridge: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    let options = RunOptions {
        realtime: realtime || bridge.is_some(),
        speed,
        stop_when_done: bridge.is_none(),
        bridge,
    };
    let outcome = match drive(world, options) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    if let Some(dir) = log {
        if let Err(e) = write_logs(&outcome.log, &dir) {
            eprintln!("error: cannot write logs to {}: {e}", dir.display());
            return ExitCode::from(EXIT_RUNTIME);
        }
    }
    log::info!(
        "{} steps, min pairwise distance {:.3} m",
        outcome.steps,
        outcome.log.min_distance()
    );
    if outcome.all_tasks_completed {
        ExitCode::SUCCESS
    } else {
        eprintln!("run ended with tasks outstanding");
        ExitCode::from(EXIT_INCOMPLETE)
    }
}

fn bench_cmd(spec: Result<BenchSpec, String>, out: Option<PathBuf>) -> ExitCode {
    let spec = match spec {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let rows = match run_bench(&spec) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let written = match out {
        Some(path) => File::create(&path).and_then(|f| {
            let mut w = BufWriter::new(f);
            write_bench_csv(&rows, &mut w)?;
            w.flush()
        }),
        None => write_bench_csv(&rows, &mut std::io::stdout().lock()),
    };
    match written {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: cannot write results: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Cmd::Run {
            scenario,
            seed,
            log,
            serve,
            realtime,
            speed,
        } => run_cmd(scenario, seed, log, serve, realtime, speed),
        Cmd::Bench {
            agents,
            tasks,
            participation,
            trials,
            seed,
            out,
        } => {
            let spec = (|| {
                Ok(BenchSpec {
                    agents: parse_list("agents", &agents)?,
                    tasks: parse_list("tasks", &tasks)?,
                    participation: parse_list("participation", &participation)?,
                    trials,
                    seed,
                })
            })();
            bench_cmd(spec, out)
        }
    }
}
