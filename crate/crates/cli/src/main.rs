mod cmd;
mod config;
mod error;
mod input;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};

use crate::config::CliConfig;
use crate::error::{CliError, CliResult};

/// Fit curves to demonstrations on manifolds and run the curve-following
/// dynamical system.
///
/// Exit codes: 0 success, 1 runtime failure, 2 partial result (unconverged
/// fit, failed benchmark shape, aborted rollout), 3 input error.
#[derive(Debug, Parser)]
#[command(name = "dsmp", version)]
struct Cli {
    /// TOML manifest with defaults; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a composite Bézier curve to demonstrations.
    Fit(cmd::fit::FitArgs),
    /// Evaluate the dynamical system at query points.
    Eval(cmd::query::EvalArgs),
    /// Closest-point projection onto a curve.
    Project(cmd::query::ProjectArgs),
    /// Integrate the dynamical system from one initial state.
    Rollout(cmd::rollout::RolloutArgs),
    /// Minimum-time phase profile under a speed limit.
    PhaseOpt(cmd::phase::PhaseArgs),
    /// Build or query an SPD damping profile.
    #[command(subcommand)]
    Damping(cmd::damping::DampingCommand),
    /// Run the benchmark protocol over a demonstration corpus.
    Bench(cmd::bench::BenchArgs),
    /// Write curve samples or the synthetic corpus.
    #[command(subcommand)]
    Export(cmd::export::ExportCommand),
}

pub enum Outcome {
    Done,
    Partial,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_env("DSMP_LOG").init();
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> CliResult<Outcome> {
    configure_threads()?;
    let cfg = CliConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Fit(a) => cmd::fit::run(a, &cfg),
        Command::Eval(a) => cmd::query::eval(a, &cfg),
        Command::Project(a) => cmd::query::project(a, &cfg),
        Command::Rollout(a) => cmd::rollout::run(a, &cfg),
        Command::PhaseOpt(a) => cmd::phase::run(a, &cfg),
        Command::Damping(c) => cmd::damping::run(c, &cfg),
        Command::Bench(a) => cmd::bench::run(a, &cfg),
        Command::Export(c) => cmd::export::run(c, &cfg),
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("DSMP_THREADS") else {
        return Ok(());
    };
    let n = v
        .trim()
        .parse::<usize>()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::input(format!("DSMP_THREADS must be a positive integer, got {v:?}")))?;
    dsmp::rollout::configure_threads(n)?;
    Ok(())
}
