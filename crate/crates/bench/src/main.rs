use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use gg_bench::config::RunConfig;
use gg_bench::{runner, suite, sweep, BenchError};

/// Overlap-identity checks on exactly enumerable spin glasses.
#[derive(Debug, Parser)]
#[command(name = "ggbench", version)]
struct Cli {
    /// Worker threads; overrides `workers` in the config.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory; overrides `output` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the checks listed in a config file.
    Run { config: PathBuf },
    /// Repeat a run over system sizes and fit finite-size trends.
    Sweep {
        config: PathBuf,
        /// Comma-separated system sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
    },
    /// Evaluate a built-in acceptance suite.
    Check {
        #[arg(long, value_enum, default_value_t = SuiteName::Desk)]
        suite: SuiteName,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SuiteName {
    Desk,
}

fn load(cli: &Cli, path: &Path) -> Result<RunConfig, BenchError> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(BenchError::Config("--workers must be at least 1".into()));
        }
        cfg.workers = w;
    }
    if let Some(out) = &cli.out {
        cfg.output = out.clone();
    }
    Ok(cfg)
}

fn report(outcome: &runner::RunOutcome, out: &std::path::Path) {
    eprintln!(
        "{} records, {} hard failures, {} soft warnings -> {}",
        outcome.records.len(),
        outcome.hard_failures(),
        outcome.soft_warnings(),
        out.display()
    );
}

fn dispatch(cli: &Cli) -> Result<i32, BenchError> {
    match &cli.command {
        Command::Run { config } => {
            let cfg = load(cli, config)?;
            let outcome = runner::run(&cfg, &cfg.output)?;
            report(&outcome, &cfg.output);
            Ok(outcome.exit_code())
        }
        Command::Sweep { config, sizes } => {
            let cfg = load(cli, config)?;
            let outcome = sweep::sweep(&cfg, sizes, &cfg.output)?;
            for (n, run) in &outcome.runs {
                eprint!("N={n}: ");
                report(run, &cfg.output.join(format!("N{n}")));
            }
            Ok(outcome.exit_code())
        }
        Command::Check { suite: SuiteName::Desk } => {
            let workers = cli.workers.unwrap_or(1).max(1);
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| BenchError::Config(e.to_string()))?;
            let results = pool.install(|| suite::desk_suite(|c| println!("{c}")));
            let failed = results.iter().any(|c| !c.passed && !c.soft);
            Ok(i32::from(failed))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("ggbench: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
