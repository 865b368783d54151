//! `nlfb`: runs one experiment from a JSON config and writes a manifest,
//! CSV tables and SVG plots.
//!
//! Exit codes: 0 when every check passes, 2 when a check fails, 1 on any
//! error (including config errors, which write nothing).

mod commands;
mod config;
mod report;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser};

use config::Subcommand;

#[derive(Parser, Debug)]
#[command(name = "nlfb", version, about = "Experiments for nonlocal free boundary problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Subcommand, Debug)]
enum Command {
    /// Run any config, dispatching on its `subcommand` field.
    Run(Target),
    /// Dirichlet problem in an interval.
    SolveDirichlet(Target),
    /// One-phase minimisers and their free boundary reports.
    OnePhase(Target),
    /// Half-line solutions.
    HalfSpace(Target),
    /// Obstacle problem.
    Obstacle(Target),
    /// Critical exponent of the extremal operator.
    Beta0(Target),
    /// Log-log exponent fit of samples.
    FitExponent(Target),
    /// Reduction of a planar kernel to one dimension.
    ReduceKernel(Target),
}

#[derive(Args, Debug)]
struct Target {
    /// JSON config file.
    config: PathBuf,
    /// Output directory (overrides `output` in the config).
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Only print errors.
    #[arg(short, long)]
    quiet: bool,
}

fn dispatch(cli: Cli) -> Result<bool> {
    let (expected, target) = match cli.command {
        Command::Run(t) => (None, t),
        Command::SolveDirichlet(t) => (Some(Subcommand::SolveDirichlet), t),
        Command::OnePhase(t) => (Some(Subcommand::OnePhase), t),
        Command::HalfSpace(t) => (Some(Subcommand::HalfSpace), t),
        Command::Obstacle(t) => (Some(Subcommand::Obstacle), t),
        Command::Beta0(t) => (Some(Subcommand::Beta0), t),
        Command::FitExponent(t) => (Some(Subcommand::FitExponent), t),
        Command::ReduceKernel(t) => (Some(Subcommand::ReduceKernel), t),
    };
    let text = config::read(&target.config)?;
    let sub = config::peek_subcommand(&text)?;
    if let Some(e) = expected {
        if e != sub {
            bail!("config {} is a `{}` config, not `{}`", target.config.display(), sub.name(), e.name());
        }
    }
    let base = target.config.parent().map(PathBuf::from).unwrap_or_default();
    let opts = commands::Options { out: target.out, quiet: target.quiet, base };
    commands::run(sub, &text, &opts)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
