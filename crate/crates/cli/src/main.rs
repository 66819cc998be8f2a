//! `viability-kit`: run classify / verify / solve / degree / report
//! pipelines from a scenario file.
//!
//! Exit codes: 0 success, 1 internal error, 2 invalid scenario or usage,
//! 3 no BVP solution found, 4 condition failure.

mod commands;
mod digest;
mod output;
mod scenario;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use viability_kit::Error;

use crate::commands::Theorem;
use crate::output::Writer;
use crate::scenario::Overrides;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        CliError { code, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Dimension { .. } | Error::Argument(_) | Error::ThickeningCap { .. } | Error::Json(_) => 2,
            // The certifier or map does not meet a hypothesis it needs.
            Error::Prerequisite(_) | Error::Unsupported(_) | Error::DegreeUndefined { .. } => 4,
            _ => 1,
        };
        CliError::new(code, e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "viability-kit", version, about = "Certify and solve state-constrained boundary value problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true, env = "VIABILITY_KIT_THREADS")]
    threads: Option<usize>,
    /// Directory receiving the emitted files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the certifier tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Override the boundary residual tolerance of the solver.
    #[arg(long, global = true)]
    bvp_tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Classify boundary regularity of the constraint set.
    Classify { scenario: PathBuf },
    /// Check the hypotheses of one existence certifier.
    Verify {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        theorem: Theorem,
    },
    /// Search for solutions of the boundary value problem.
    Solve { scenario: PathBuf },
    /// Brouwer degree of the scenario's degree block.
    Degree { scenario: PathBuf },
    /// Markdown digest of the outputs already in `--out`.
    Report { scenario: PathBuf },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(CliError::new(2, "--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::new(1, format!("thread pool: {e}")))?;
    }
    let over = Overrides { seed: cli.seed, tol: cli.tol, bvp_tol: cli.bvp_tol };
    let (name, path) = match &cli.command {
        Command::Classify { scenario } => ("classify", scenario),
        Command::Verify { scenario, .. } => ("verify", scenario),
        Command::Solve { scenario } => ("solve", scenario),
        Command::Degree { scenario } => ("degree", scenario),
        Command::Report { scenario } => ("report", scenario),
    };
    let loaded = scenario::load(path, &over)?;
    let writer =
        Writer { dir: cli.out.clone(), command: name.into(), scenario: loaded.name(), seed: loaded.scenario.seed };
    match cli.command {
        Command::Classify { .. } => commands::classify(&loaded, &writer),
        Command::Verify { theorem, .. } => commands::verify(&loaded, theorem, &writer),
        Command::Solve { .. } => commands::solve(&loaded, &writer),
        Command::Degree { .. } => commands::degree(&loaded, &writer),
        Command::Report { .. } => {
            let text = digest::render(&cli.out, &loaded.name())?;
            let path = cli.out.join("digest.md");
            output::write_text(&path, &text)?;
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("viability-kit: {e}");
            ExitCode::from(e.code)
        }
    }
}
