mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::LevelFilter;

use commands::{CmdError, Outcome};

/// Stability equivalence analysis for time-delay systems.
///
/// Exit codes: 0 success (PASS, CONVERGED), 1 configuration or parse error,
/// 2 hypothesis WARN, 3 DIVERGED or BOUNDARY, 4 computation FAILED.
#[derive(Parser)]
#[command(name = "tds", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the structural hypotheses of the system.
    Check(Args),
    /// Follow a single ray from the start point.
    Ray(Args),
    /// Follow a fan of rays from the start point.
    Fan(Args),
    /// Grow a stability equivalence region around the start point.
    Region(Args),
    /// Count zeros in the closed right half-plane at the start point.
    Count(Args),
    /// Convert a distributed-delay model into a characteristic function.
    Convert(Args),
}

#[derive(clap::Args)]
struct Args {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Debug logging on stderr.
    #[arg(long)]
    verbose: bool,
}

fn run(f: fn(&config::Loaded, &Path) -> Result<Outcome, CmdError>, args: &Args) -> Result<Outcome, CmdError> {
    let loaded = config::load(&args.config)?;
    f(&loaded, &args.out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let (f, args): (fn(&config::Loaded, &Path) -> Result<Outcome, CmdError>, &Args) = match &cli.command {
        Command::Check(a) => (commands::check, a),
        Command::Ray(a) => (commands::ray, a),
        Command::Fan(a) => (commands::fan, a),
        Command::Region(a) => (commands::region, a),
        Command::Count(a) => (commands::count, a),
        Command::Convert(a) => (commands::convert, a),
    };
    env_logger::Builder::new()
        .filter_level(if args.verbose { LevelFilter::Debug } else { LevelFilter::Warn })
        .parse_default_env()
        .init();
    match run(f, args) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            ExitCode::from(outcome.code as u8)
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code() as u8)
        }
    }
}
