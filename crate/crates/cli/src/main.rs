//! `mixbound` command-line front end.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::config::{ConfigFile, Format, Globals};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] mixbound::Error),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Parser)]
#[command(name = "mixbound", version, about = "Mixing-aware maximal inequalities: exact computations and Monte Carlo checks")]
struct Cli {
    /// JSON file with the same keys as the flags; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (default: $MIXBOUND_SEED, else 7).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for replications (default: available cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Record wall-clock seconds in the report (breaks bit-stability).
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Divisor set and block-length schedule for a sample size.
    Schedule(commands::ScheduleArgs),
    /// Rate factor, envelopes and regime over a range of sample sizes.
    Rates(commands::RatesArgs),
    /// mu_q breakpoints, q-norm of a sample and B_r(q).
    Norms(commands::NormsArgs),
    /// Complexity functional of a finite class.
    Gamma(commands::GammaArgs),
    /// Monte Carlo sup of the empirical process.
    Simulate(commands::SimulateArgs),
    /// Replica coupling gaps against the tau bound.
    Couple(commands::CoupleArgs),
    /// Gaussian strong approximation over a grid of sample sizes.
    Strongapprox(commands::StrongApproxArgs),
    /// Run acceptance checks.
    Verify(commands::VerifyArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Schedule(_) => "schedule",
            Self::Rates(_) => "rates",
            Self::Norms(_) => "norms",
            Self::Gamma(_) => "gamma",
            Self::Simulate(_) => "simulate",
            Self::Couple(_) => "couple",
            Self::Strongapprox(_) => "strongapprox",
            Self::Verify(_) => "verify",
        }
    }
}

fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var("MIXBOUND_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Config(format!("MIXBOUND_SEED must be an unsigned integer, got `{s}`"))),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let start = Instant::now();
    let name = cli.command.name();
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path, name)?,
        None => ConfigFile::default(),
    };
    let flags = Globals { seed: cli.seed, workers: cli.workers, format: cli.format, output: cli.output.clone() };
    let globals = config::merge_globals(&flags, &file.globals);
    let ctx = commands::Context {
        seed: match globals.seed {
            Some(s) => s,
            None => env_seed()?.unwrap_or(mixbound::seed::DEFAULT_SEED),
        },
        workers: globals
            .workers
            .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
            .max(1),
    };
    let mut out = match &cli.command {
        Command::Schedule(a) => commands::schedule(&config::merge(a, &file.command)?, &ctx)?,
        Command::Rates(a) => commands::rates(&config::merge(a, &file.command)?, &ctx)?,
        Command::Norms(a) => commands::norms(&config::merge(a, &file.command)?, &ctx)?,
        Command::Gamma(a) => commands::gamma(&config::merge(a, &file.command)?, &ctx)?,
        Command::Simulate(a) => commands::simulate(&config::merge(a, &file.command)?, &ctx)?,
        Command::Couple(a) => commands::couple(&config::merge(a, &file.command)?, &ctx)?,
        Command::Strongapprox(a) => commands::strongapprox(&config::merge(a, &file.command)?, &ctx)?,
        Command::Verify(a) => commands::verify(&config::merge(a, &file.command)?, &ctx)?,
    };
    if let serde_json::Value::Object(inputs) = &mut out.report.inputs {
        inputs.insert("seed".into(), ctx.seed.into());
    }
    if cli.timing {
        out.report.wall_clock_seconds = Some(start.elapsed().as_secs_f64());
    }
    let ok = out.report.all_pass();
    output::emit(&out, globals.format, globals.output.as_deref())?;
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
