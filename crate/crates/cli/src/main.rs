use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use dgshock::parse_config;
use dgshock::run::{lemma_lines, lemma_reports, run, sweep};
use dgshock_core::Execution;

#[derive(Parser)]
#[command(name = "dgshock", version, about = "Space-time DG solver for scalar conservation laws")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Parallel,
    Sequential,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configuration and write solution, diagnostics and summary.
    Run { config: PathBuf },
    /// Run an h-refinement series, doubling cells and slabs per level.
    Sweep {
        config: PathBuf,
        #[arg(long, default_value_t = 2)]
        refine: u32,
    },
    /// Check the discrete coercivity lemma on random nodal vectors.
    VerifyLemma {
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        p: Vec<usize>,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, value_delimiter = ',', default_value = "2,4,6,8")]
        q: Vec<u32>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Mode::Parallel)]
        execution: Mode,
    },
}

fn load(path: &PathBuf) -> Result<dgshock::RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text).with_context(|| format!("invalid config {}", path.display()))
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config } => {
            let summary = run(&load(&config)?)?;
            println!("{}", summary.line());
        }
        Command::Sweep { config, refine } => {
            for (level, s) in sweep(&load(&config)?, refine)?.iter().enumerate() {
                println!("level={level} {}", s.line());
            }
        }
        Command::VerifyLemma {
            p,
            dim,
            q,
            trials,
            seed,
            execution,
        } => {
            let exec = match execution {
                Mode::Parallel => Execution::Parallel,
                Mode::Sequential => Execution::Sequential,
            };
            let reports = lemma_reports(&p, dim, &q, trials, seed, exec)?;
            for r in &reports {
                lemma_lines(r).iter().for_each(|l| println!("{l}"));
            }
            return Ok(reports.iter().all(|r| r.bound_holds()));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::init();
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
