//! kpde: chaos-expansion solver for parabolic equations with singular
//! potentials.
//!
//! Exit codes: 0 all requested checks pass, 1 a check failed, 2 configuration
//! error, 3 runtime/numerical error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use kpde_cli::config::{load_config, preset_config, CheckKind, ExperimentConfig};
use kpde_cli::experiment::{run_experiment, run_regularize, run_solve_chaos, run_solve_det};
use kpde_cli::report::RunReport;
use kpde_cli::CliError;

#[derive(Parser)]
#[command(name = "kpde", version, about = "chaos-expansion solver for stochastic parabolic equations with singular potentials")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration (JSON); may name a preset internally.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Built-in preset: example-sec4, consistency-cos, uniqueness-negligible,
    /// mc-linear-gaussian.
    #[arg(long, global = true)]
    preset: Option<String>,

    /// Override the sampling seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (falls back to KPDE_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Regularization scale for single solves of singular potentials.
    #[arg(long, global = true)]
    eps: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: regularization sweep, chaos solves, checks, outputs.
    Run,
    /// Deterministic solve of the zero-index problem.
    SolveDet,
    /// One chaos solve with coefficient and statistics dumps.
    SolveChaos,
    /// Mollification sweep of the potential.
    Regularize,
    /// Run verification checks (all configured ones, or --check).
    Verify {
        /// Subset of checks to run.
        #[arg(long, value_delimiter = ',')]
        check: Vec<CheckArg>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckArg {
    Moderate,
    Unique,
    Consistent,
    Mc,
}

impl From<CheckArg> for CheckKind {
    fn from(c: CheckArg) -> Self {
        match c {
            CheckArg::Moderate => CheckKind::Moderate,
            CheckArg::Unique => CheckKind::Unique,
            CheckArg::Consistent => CheckKind::Consistent,
            CheckArg::Mc => CheckKind::Mc,
        }
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut config = match (&cli.config, &cli.preset) {
        (Some(path), _) => load_config(path)?,
        (None, Some(name)) => preset_config(name)?,
        (None, None) => {
            return Err(CliError::Config(
                "pass --config <path> or --preset <name>".into(),
            ));
        }
    };
    if let Some(seed) = cli.seed {
        config.verification.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output.directory = out.display().to_string();
    }
    config.validate()?;
    Ok(config)
}

fn threads(cli: &Cli) -> Option<usize> {
    cli.threads.or_else(|| {
        std::env::var("KPDE_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
}

fn execute(cli: &Cli) -> Result<RunReport, CliError> {
    let mut config = load(cli)?;
    match &cli.command {
        Command::Run => run_experiment(&config),
        Command::Verify { check } => {
            if !check.is_empty() {
                config.verification.checks = check.iter().map(|&c| c.into()).collect();
                config.validate()?;
            }
            run_experiment(&config)
        }
        Command::Regularize => run_regularize(&config),
        Command::SolveChaos => run_solve_chaos(&config, cli.eps),
        Command::SolveDet => run_solve_det(&config, cli.eps),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = || match execute(&cli) {
        Ok(report) => {
            for check in &report.numeric.checks {
                eprintln!("check {:12} {:?}", check.name(), check.verdict());
            }
            eprintln!(
                "report written to {}/report.json",
                report.numeric.config.output.directory
            );
            if report.numeric.all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    };
    match threads(&cli) {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build();
            match pool {
                Ok(pool) => pool.install(run),
                Err(e) => {
                    eprintln!("cannot build thread pool: {e}");
                    ExitCode::from(3)
                }
            }
        }
        None => run(),
    }
}
