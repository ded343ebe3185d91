use std::path::PathBuf;
use std::process::ExitCode;

use chflow_cli::{commands, CliError, RunConfig};
use clap::{Args, Parser, Subcommand};

/// Advective Cahn-Hilliard solver and verification harness.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario and write time series, snapshots and a summary.
    Run(Common),
    /// Measure the distance to the transport-free solution over `sweep.betas`.
    SweepBeta(Common),
    /// Run the verification checks and print a pass/fail table.
    Verify(Common),
    /// Compare the fixed-point solver with the strong-form oracle.
    OracleCompare(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `output.dir` from the config, then `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for parallel studies (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Seed for randomized checks; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn execute(command: Command) -> Result<(), CliError> {
    let (Command::Run(common) | Command::SweepBeta(common) | Command::Verify(common) | Command::OracleCompare(common)) =
        &command;
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let requested_out = common.out.clone().or_else(|| cfg.output.dir.clone());
    let out = requested_out.clone().unwrap_or_else(|| PathBuf::from("out"));

    match &command {
        Command::Run(_) => {
            let summary = commands::run(&cfg, &out)?;
            println!(
                "converged after {} Picard iterations; max energy residual {:.3e}; a-priori margin {:.3e}",
                summary.picard_iters.unwrap_or(0),
                summary.max_energy_residual.unwrap_or(f64::NAN),
                summary.apriori_margin.unwrap_or(f64::NAN),
            );
        }
        Command::SweepBeta(_) => {
            let summary = commands::sweep_beta(&cfg, &out)?;
            println!("fitted slope {:.4}", summary.rate_slope.unwrap_or(f64::NAN));
        }
        Command::Verify(_) => {
            let report = commands::verify(&cfg, requested_out.as_deref())?;
            print!("{}", report.table());
            if !report.passed() {
                return Err(CliError::Verification("see table".into()));
            }
        }
        Command::OracleCompare(_) => {
            let report = commands::oracle_compare(&cfg, &out)?;
            println!("sup_t |u - u_oracle|_V = {:.3e} (tolerance {:.1e})", report.discrepancy, report.tolerance);
            if !report.passed() {
                return Err(CliError::Verification("oracle discrepancy above tolerance".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
