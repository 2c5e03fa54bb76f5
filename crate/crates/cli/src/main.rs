//! `updoubling`: verification runs on weighted point clouds.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 on bad
//! input or configuration.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use updoubling::Error as CoreError;

use crate::commands::Verdict;
use crate::config::{FunctionSource, RunConfig};

#[derive(Parser)]
#[command(
    name = "updoubling",
    version,
    about = "Upper doubling spaces, RBMO norms and John-Nirenberg checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand)]
enum Command {
    /// Doubling diagnostics, dominating-function axioms and the kernel bound.
    Analyze,
    /// Solve for the RBMO norm and check the resulting constants.
    Rbmo,
    /// Stopping-ball decomposition and tail estimates.
    Jn,
    /// Maximal function and its weak (1,1) bound.
    Maximal,
    /// Write a generated space as a document plus its ball table.
    Generate,
}

#[derive(Args)]
struct Flags {
    /// JSON config with the same keys as the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Space document (JSON).
    #[arg(long, global = true)]
    space: Option<PathBuf>,
    /// Generator such as `uniform_grid(16,1)` or `cantor_dust(3)`.
    #[arg(long, global = true)]
    generate: Option<String>,
    /// `ball`, `power(C,d)`, `fit(d)` or `envelope(C)`.
    #[arg(long, global = true)]
    lambda: Option<String>,
    /// `spike(i)`, `constant(c)`, `sawtooth(p)`, `random`, or a JSON file of values.
    #[arg(long, global = true)]
    function: Option<String>,
    #[arg(long, global = true)]
    rho: Option<f64>,
    /// Second inflation parameter for the comparison, below rho.
    #[arg(long, global = true)]
    sigma: Option<f64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// Top ball as `center,radius`.
    #[arg(long, global = true)]
    ball: Option<String>,
    /// Levels as `min:max:steps`.
    #[arg(long = "t-grid", global = true)]
    t_grid: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Allow solving on spaces above the size cap.
    #[arg(long, global = true)]
    force: bool,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

impl Flags {
    fn into_config(self) -> anyhow::Result<RunConfig> {
        let base = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let flags = RunConfig {
            space: self.space,
            generate: self.generate,
            lambda: self.lambda,
            function: self.function.map(FunctionSource::Spec),
            rho: self.rho,
            sigma: self.sigma,
            alpha: self.alpha,
            beta: self.beta,
            ball: self.ball,
            t_grid: self.t_grid,
            out: self.out,
            force: self.force,
            seed: self.seed,
        };
        let config = base.overlay(flags);
        config.validate()?;
        Ok(config)
    }
}

fn run(cli: Cli) -> anyhow::Result<Verdict> {
    let config = cli.flags.into_config()?;
    match cli.command {
        Command::Analyze => commands::analyze(&config),
        Command::Rbmo => commands::rbmo(&config),
        Command::Jn => commands::jn(&config),
        Command::Maximal => commands::maximal(&config),
        Command::Generate => commands::generate(&config),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(Verdict::Fail(why)) => {
            eprintln!("check failed: {why}");
            ExitCode::from(1)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            // Numerical breakdowns are failures of the run, not of the input.
            match err.downcast_ref::<CoreError>() {
                Some(CoreError::Solver(_) | CoreError::NoStoppingBall { .. }) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
