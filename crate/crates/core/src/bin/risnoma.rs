//! Command-line sweep runner.
//!
//! ```text
//! risnoma run --config sweep.toml --out results.csv [--seed N] [--trials N] [--parallel N]
//! risnoma run --preset fig3 --out fig3.csv
//! ```
//!
//! Exit codes: 0 on success, 2 on a configuration error, 3 when every
//! scheme was infeasible in every trial, 1 on any other failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use risnoma::experiments::{emit_csv, load_config, preset, run_sweep};
use risnoma::Error;

#[derive(Parser)]
#[command(name = "risnoma", version, about = "Sum-rate sweeps for RIS-assisted NOMA backscatter networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write one CSV row per (value, scheme).
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Sweep description (TOML).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in sweep: fig3, fig4 or fig5.
    #[arg(long)]
    preset: Option<String>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the number of trials per value.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
}

fn run(args: RunArgs) -> Result<ExitCode, Error> {
    let mut spec = match (&args.config, &args.preset) {
        (Some(path), _) => load_config(path)?,
        (None, Some(name)) => preset(name)?,
        (None, None) => return Err(Error::Config("either --config or --preset is required".into())),
    };
    if let Some(seed) = args.seed {
        spec.base.seed = seed;
    }
    if let Some(trials) = args.trials {
        spec.n_trials = trials;
    }
    if args.parallel == 0 {
        return Err(Error::Config("--parallel must be at least 1".into()));
    }
    spec.validate()?;
    let rows = run_sweep(&spec, args.parallel)?;
    emit_csv(&rows, &args.out)?;
    if rows.iter().all(|r| r.feasible_frac == 0.0) {
        eprintln!("every trial was infeasible for every scheme");
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => match run(args) {
            Ok(code) => code,
            Err(e @ Error::Config(_)) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
    }
}
