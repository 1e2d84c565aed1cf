//! `rmst` — restricted mean survival time estimation from right-censored
//! trial data, plus the scenario-simulation harness.
//!
//! Exit codes: 0 success, 2 input error, 3 numerical failure,
//! 4 convergence failure.

use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rmst_core::{Error, Result};

mod campaign;
mod fit;
mod model;

#[derive(Parser)]
#[command(
    name = "rmst",
    version,
    about = "Covariate-adjusted restricted mean survival time estimation on pseudo-observations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit GEE and Bayesian GMM restricted-mean models to a dataset
    Fit(fit::FitArgs),
    /// Compute jackknife pseudo-observations for a dataset
    Pseudo(fit::PseudoArgs),
    /// Generate a scenario dataset
    Simulate(campaign::SimulateArgs),
    /// Run a replication campaign and aggregate performance metrics
    Campaign(campaign::CampaignArgs),
    /// Unadjusted estimates across data-driven restriction-time rules
    TauScan(fit::TauScanArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Fit(_) => "fit",
            Command::Pseudo(_) => "pseudo",
            Command::Simulate(_) => "simulate",
            Command::Campaign(_) => "campaign",
            Command::TauScan(_) => "tau-scan",
        }
    }

    fn workers(&self) -> Option<usize> {
        match self {
            Command::Fit(args) => args.workers,
            Command::Campaign(args) => args.workers,
            Command::TauScan(args) => args.workers,
            _ => None,
        }
    }
}

/// Write to a file or stdout.
pub(crate) fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    match path {
        Some(path) => std::fs::write(path, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn resolve_workers(flag: Option<usize>) -> Option<usize> {
    flag.or_else(|| {
        std::env::var("RMST_BGMM_WORKERS").ok().and_then(|v| v.trim().parse().ok())
    })
    .filter(|&w| w >= 1)
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::EmptyDataset
        | Error::TooFewRecords { .. }
        | Error::InsufficientEvents { .. }
        | Error::SingleArm
        | Error::InvalidRecord(_)
        | Error::InvalidSpec(_)
        | Error::UnknownParameter(_)
        | Error::Csv(_)
        | Error::Io(_)
        | Error::Json(_) => 2,
        Error::DimensionMismatch { .. }
        | Error::RankDeficient
        | Error::SingularCovariance
        | Error::DomainError(_)
        | Error::NonFiniteTarget(_)
        | Error::TooFewDraws { .. }
        | Error::TooFewChains(_)
        | Error::Unachievable(_)
        | Error::Numerical(_) => 3,
        Error::TooFewConverged { .. } => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(workers) = resolve_workers(cli.command.workers()) {
        // ignore the error when a global pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
    }
    let name = cli.command.name();
    let result = match &cli.command {
        Command::Fit(args) => fit::run_fit(args),
        Command::Pseudo(args) => fit::run_pseudo(args),
        Command::Simulate(args) => campaign::run_simulate(args),
        Command::Campaign(args) => campaign::run_campaign(args),
        Command::TauScan(args) => fit::run_tau_scan(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("rmst {name}: error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
