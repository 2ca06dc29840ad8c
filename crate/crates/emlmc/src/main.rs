//! Command-line front end: convergence studies, pipeline comparisons, and
//! generic config-driven estimator runs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use emlmc::config::RunConfig;
use emlmc::experiments::{run_compare, run_convergence, run_custom};
use emlmc::report::float_cell;
use emlmc::{Error, Result};

#[derive(Parser)]
#[command(
    name = "emlmc",
    about = "Ensemble multilevel Monte Carlo solver for the random heat equation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measure mean-field errors against the closed-form mean for L = 1..levels.
    Convergence(StudyArgs),
    /// Run the shared-matrix and per-sample pipelines on identical samples.
    Compare(StudyArgs),
    /// Run the estimator exactly as configured.
    Run(RunArgs),
}

#[derive(Args)]
struct StudyArgs {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Override the finest level.
    #[arg(long)]
    levels: Option<usize>,
    /// Override the replica count.
    #[arg(long)]
    replicas: Option<usize>,
    /// Override the root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
}

fn configure_pool(jobs: Option<usize>) -> Result<()> {
    if let Some(n) = jobs {
        if n == 0 {
            return Err(Error::InvalidArgument("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    }
    Ok(())
}

fn load_with_overrides(args: &StudyArgs) -> Result<RunConfig> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(levels) = args.levels {
        config.levels = levels;
    }
    if let Some(replicas) = args.replicas {
        config.replicas = replicas;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Convergence(args) => {
            configure_pool(args.jobs)?;
            let config = load_with_overrides(&args)?;
            let report = run_convergence(&config)?;
            println!("L  E_L2          rate    E_H1          rate");
            for row in &report.rows {
                println!(
                    "{}  {:.6e}  {}  {:.6e}  {}",
                    row.level,
                    row.e_l2,
                    row.rate_l2.map_or_else(|| "  --  ".into(), |r| format!("{r:6.3}")),
                    row.e_h1,
                    row.rate_h1.map_or_else(|| "  --  ".into(), |r| format!("{r:6.3}")),
                );
            }
            println!("reports in {}", config.output_dir.display());
        }
        Command::Compare(args) => {
            configure_pool(args.jobs)?;
            let config = load_with_overrides(&args)?;
            let report = run_compare(&config)?;
            println!("sup |difference| = {}", float_cell(report.sup_diff));
            println!(
                "shared-matrix pipeline:  solve {:8.3} s, assembly {:8.3} s, total {:8.3} s",
                report.ensemble_cost.solve_seconds,
                report.ensemble_cost.assembly_seconds,
                report.ensemble_cost.total_seconds,
            );
            println!(
                "per-sample pipeline:     solve {:8.3} s, assembly {:8.3} s, total {:8.3} s",
                report.independent_cost.solve_seconds,
                report.independent_cost.assembly_seconds,
                report.independent_cost.total_seconds,
            );
            println!(
                "solve-time ratio (per-sample / shared) = {:.3}",
                report.independent_cost.solve_seconds / report.ensemble_cost.solve_seconds,
            );
            println!("reports in {}", config.output_dir.display());
        }
        Command::Run(args) => {
            let config = RunConfig::load(&args.config)?;
            config.validate()?;
            let report = run_custom(&config)?;
            println!("l  h             dt            J      groups");
            for row in &report.table {
                println!(
                    "{}  {:.6e}  {:.6e}  {:5}  {:5}",
                    row.level, row.h, row.dt, row.samples, row.groups
                );
            }
            println!("reports in {}", config.output_dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {e}", e.kind());
            ExitCode::FAILURE
        }
    }
}
