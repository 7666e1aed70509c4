//! Command-line surface: equilibrium solving, declarative experiment runs,
//! plotting, exploration sweeps, shock-response presets and the dual-buffer
//! entry scenarios.
//!
//! Exit codes: 0 success, 2 configuration/validation failure, 3 runtime
//! numerical failure.

mod commands;
mod config;
mod plot;
mod results;

use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pricegame_core::Error;

#[derive(Parser)]
#[command(name = "pricegame", version, about = "Repeated pricing games played by learning agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PlotKind {
    RewardTrajectory,
    PriceResponse,
    SweepBars,
    DualBufferTimeline,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RespondPreset {
    /// One-period forced price cut for agent 0.
    Cut,
    /// One-period forced price raise for agent 0.
    Raise,
    /// Agent 0 raised for one period while agent 1 holds its price.
    RaiseHold,
    /// Agent 0 permanently set just above the competitive price.
    Permanent,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DualScenario {
    /// Newcomer maximizes its own profit against a stationary incumbent.
    Adversarial,
    /// Newcomer also values the incumbent's profit.
    Collusive,
    /// Adversarial, plus a temporary incumbent switch to just above the
    /// competitive price.
    Nonstationary,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the symmetric competitive and collusive prices and print the
    /// discretized grid.
    SolveEq {
        #[arg(long, default_value_t = 2)]
        agents: usize,
        #[arg(long, default_value_t = 0.25)]
        mu: f64,
        #[arg(long, default_value_t = 0.0)]
        a0: f64,
        #[arg(long, default_value_t = 2.0)]
        quality: f64,
        #[arg(long, default_value_t = 1.0)]
        mc: f64,
        #[arg(long, default_value_t = 15)]
        grid_size: usize,
        #[arg(long, default_value_t = 0.1)]
        xi: f64,
    },
    /// Run a config-file experiment and write results.csv, summary.txt and
    /// the effective config.
    Run {
        #[arg(long)]
        config: std::path::PathBuf,
        #[arg(long)]
        out: std::path::PathBuf,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's replica count.
        #[arg(long)]
        replicas: Option<usize>,
        /// Validate and echo the effective config without running.
        #[arg(long)]
        dry_run: bool,
    },
    /// Render an SVG chart from a results CSV.
    Plot {
        #[arg(long)]
        csv: std::path::PathBuf,
        #[arg(long)]
        kind: PlotKind,
        #[arg(long)]
        out: std::path::PathBuf,
        /// Effective config of the run (defaults to effective_config.toml
        /// next to the CSV; used for benchmark lines and shaded windows).
        #[arg(long)]
        config: Option<std::path::PathBuf>,
    },
    /// Vary agent 1's exploration decay and compare post-convergence
    /// profits.
    Sweep {
        #[arg(long)]
        config: std::path::PathBuf,
        #[arg(long)]
        out: std::path::PathBuf,
        /// Comma-separated decay values for agent 1.
        #[arg(long, value_delimiter = ',', default_value = "1e-5,2e-5,5e-5,1e-4")]
        betas: Vec<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replicas: Option<usize>,
    },
    /// Shock-response presets on converged duopolies.
    Respond {
        #[arg(long)]
        preset: RespondPreset,
        #[arg(long)]
        out: std::path::PathBuf,
        #[arg(long, default_value_t = 4242)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        replicas: usize,
        /// Periods the held agent keeps its price (raise-hold preset).
        #[arg(long, default_value_t = 1)]
        hold: usize,
    },
    /// Incumbent/newcomer entry scenarios with the dual-buffer learner.
    DualBuffer {
        #[arg(long)]
        scenario: DualScenario,
        #[arg(long)]
        out: std::path::PathBuf,
        #[arg(long, default_value_t = 91)]
        seed: u64,
        /// Incumbent table snapshot; trained on the fly when omitted.
        #[arg(long)]
        incumbent: Option<std::path::PathBuf>,
        #[arg(long, default_value_t = 4000)]
        observe: usize,
        #[arg(long, default_value_t = 4000)]
        online: usize,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Numerical(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
