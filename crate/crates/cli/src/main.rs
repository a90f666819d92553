//! Command-line front end: single runs, mode comparisons, swarm-size
//! sweeps, and record-stream summaries, all driven by a JSON config.
//!
//! Exit codes: 0 on success, 1 for configuration problems (unreadable or
//! invalid config, bad flag values), 2 for runtime failures.

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use swarmwatch::harness::{self, ExperimentConfig, Mode};

#[derive(Parser)]
#[command(
    name = "swarmwatch",
    version,
    about = "Deterministic UAV swarm monitoring simulator and optimizer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON experiment config; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's worker thread count (0 = library default).
    #[arg(long)]
    threads: Option<usize>,
}

impl ConfigArgs {
    fn load(&self) -> anyhow::Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)
                .with_context(|| format!("loading config {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(out) = &self.out {
            config.output_dir = Some(out.clone());
        }
        if let Some(threads) = self.threads {
            config.threads = threads;
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and print its summary as JSON.
    Run {
        #[command(flatten)]
        shared: ConfigArgs,
        /// Run seed; defaults to the config's first seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Decision mode override: "proposed" or "baseline".
        #[arg(long)]
        mode: Option<String>,
    },
    /// Run one semi-exhaustive baseline simulation and print its summary
    /// as JSON.
    Baseline {
        #[command(flatten)]
        shared: ConfigArgs,
        /// Run seed; defaults to the config's first seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's joint candidate count.
        #[arg(long)]
        candidates: Option<usize>,
    },
    /// Run the proposed mode against the semi-exhaustive baseline on the
    /// config's seeds and print the comparison report as JSON.
    Compare {
        #[command(flatten)]
        shared: ConfigArgs,
    },
    /// Run every swarm size over the config's seeds and print per-size
    /// aggregates as JSON.
    Sweep {
        #[command(flatten)]
        shared: ConfigArgs,
        /// Swarm sizes, comma separated (e.g. --sizes 2,3,4).
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
    },
    /// Rebuild and print the summary of a JSONL record stream.
    Summarize { path: PathBuf },
    /// Validate the effective config; --dump prints it as JSON.
    Config {
        #[command(flatten)]
        shared: ConfigArgs,
        /// Print the effective config instead of just validating it.
        #[arg(long)]
        dump: bool,
    },
}

fn parse_mode(text: &str) -> anyhow::Result<Mode> {
    match text {
        "proposed" => Ok(Mode::Proposed),
        "baseline" => Ok(Mode::Baseline),
        other => Err(anyhow!("unknown mode {other:?}; use \"proposed\" or \"baseline\"")),
    }
}

/// Shared tail of `run` and `baseline`: resolve the seed, simulate inside
/// the configured thread pool, print the run summary.
fn run_once(config: ExperimentConfig, seed: Option<u64>) -> Result<(), (u8, anyhow::Error)> {
    let seed = seed.unwrap_or(config.seeds[0]);
    let output = harness::with_thread_pool(config.threads, || harness::run(&config, seed))
        .and_then(|r| r)
        .map_err(|e| (2u8, e.into()))?;
    print_json(&output.summary).map_err(|e| (2u8, e))
}

fn dispatch(cli: Cli) -> Result<(), (u8, anyhow::Error)> {
    let as_config = |e: anyhow::Error| (1u8, e);
    let as_runtime = |e: anyhow::Error| (2u8, e);
    match cli.command {
        Command::Run { shared, seed, mode } => {
            let mut config = shared.load().map_err(as_config)?;
            if let Some(mode) = &mode {
                config.mode = parse_mode(mode).map_err(as_config)?;
            }
            run_once(config, seed)
        }
        Command::Baseline {
            shared,
            seed,
            candidates,
        } => {
            let mut config = shared.load().map_err(as_config)?;
            config.mode = Mode::Baseline;
            if let Some(candidates) = candidates {
                if candidates == 0 {
                    return Err(as_config(anyhow!("--candidates must be at least 1")));
                }
                config.baseline_candidates = candidates;
            }
            run_once(config, seed)
        }
        Command::Compare { shared } => {
            let config = shared.load().map_err(as_config)?;
            let report =
                harness::with_thread_pool(config.threads, || harness::compare(&config))
                    .and_then(|r| r)
                    .map_err(|e| as_runtime(e.into()))?;
            print_json(&report).map_err(as_runtime)
        }
        Command::Sweep { shared, sizes } => {
            let config = shared.load().map_err(as_config)?;
            let aggregates =
                harness::with_thread_pool(config.threads, || harness::sweep(&config, &sizes))
                    .and_then(|r| r)
                    .map_err(|e| as_runtime(e.into()))?;
            print_json(&aggregates).map_err(as_runtime)
        }
        Command::Summarize { path } => {
            let summary = harness::summarize_file(&path)
                .with_context(|| format!("summarizing {}", path.display()))
                .map_err(as_runtime)?;
            print_json(&summary).map_err(as_runtime)
        }
        Command::Config { shared, dump } => {
            let config = shared.load().map_err(as_config)?;
            if dump {
                print_json(&config).map_err(as_runtime)
            } else {
                println!("config ok");
                Ok(())
            }
        }
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(code)
        }
    }
}
