use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bandit_harness::bounds::bound_check;
use bandit_harness::config::LoadedConfig;
use bandit_harness::error::EXIT_CHECK_FAILED;
use bandit_harness::oracle_check::oracle_check;
use bandit_harness::simulate::simulate;
use bandit_harness::HarnessError;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "bandit-sim",
    version,
    about = "Run bandit experiments and numerical checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every configured algorithm over all seeds and write trajectories.
    Simulate(CommonArgs),
    /// Compare quadrature quantities against the Monte Carlo oracle.
    OracleCheck(CommonArgs),
    /// Check IDS regret against its Bayesian regret bound.
    BoundCheck(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long)]
    jobs: Option<usize>,
}

fn run(command: Command) -> Result<bool, HarnessError> {
    let args = match &command {
        Command::Simulate(a) | Command::OracleCheck(a) | Command::BoundCheck(a) => a,
    };
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            return Err(HarnessError::config("--jobs: must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| HarnessError::config(format!("--jobs: {e}")))?;
    }
    let loaded = LoadedConfig::load(&args.config)?;
    let output = args.output.as_deref();
    match command {
        Command::Simulate(_) => {
            let result = simulate(&loaded, output)?;
            for cell in &result.summary.cells {
                println!("{}", cell.line());
            }
            println!("results written to {}", result.dir.display());
            Ok(true)
        }
        Command::OracleCheck(_) => {
            let report = oracle_check(&loaded, output)?;
            print!("{}", report.render());
            report_status(
                report.passed,
                &loaded.output_dir(output).join("oracle_check.json"),
            );
            Ok(report.passed)
        }
        Command::BoundCheck(_) => {
            let report = bound_check(&loaded, output)?;
            print!("{}", report.render());
            report_status(
                report.passed,
                &loaded.output_dir(output).join("bound_check.json"),
            );
            Ok(report.passed)
        }
    }
}

fn report_status(passed: bool, path: &Path) {
    println!(
        "{} (report: {})",
        if passed { "PASS" } else { "FAIL" },
        path.display()
    );
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_CHECK_FAILED),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
