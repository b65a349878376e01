//! `jsojourn`: sojourn-time analysis of open Jackson networks from the command line.
//!
//! Nodes are numbered from 1 on the command line and in every output file.
//!
//! Exit codes:
//!
//! | code | meaning                                                    |
//! |------|------------------------------------------------------------|
//! | 0    | success                                                    |
//! | 1    | internal error                                             |
//! | 2    | usage error (bad flags or flag values)                     |
//! | 3    | I/O error (missing network file, unwritable output)        |
//! | 4    | invalid network, path or parameter                         |
//! | 5    | unstable network                                           |
//! | 6    | numerical limit (no convergence, state space or event cap) |
//! | 7    | quantity not available for this topology                  |

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use jackson_sojourn::io::GridSpec;
use jackson_sojourn::SojournError;

#[derive(Debug, Parser)]
#[command(name = "jsojourn", version, about = "Sojourn times in open Jackson networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Traffic solution, stability, topology and every exact moment the topology permits.
    Analyze(AnalyzeArgs),
    /// Certified lower and upper bounds on the sojourn-time distribution.
    Cdf(CdfArgs),
    /// Discrete-event simulation of tagged customers.
    Simulate(SimulateArgs),
    /// Bounds, independence approximation and simulation on one grid.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Network description (JSON).
    #[arg(long)]
    network: PathBuf,
    /// Directory for output files; created if missing.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct Route {
    /// Node where the customer enters (default 1, or the first node of --path).
    #[arg(long)]
    entry: Option<usize>,
    /// Fixed node sequence, e.g. 1,2,3.
    #[arg(long, value_delimiter = ',')]
    path: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
struct Bounds {
    /// Stopping mass for the randomized chain, in (0, 1).
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    /// Queue-length cap; chosen from epsilon when omitted.
    #[arg(long)]
    cap: Option<usize>,
    /// Time grid start:stop:count; default 0:5E[T]:101.
    #[arg(long)]
    grid: Option<GridSpec>,
}

#[derive(Debug, Args)]
struct Sampling {
    /// Number of tagged customers to keep.
    #[arg(long, default_value_t = 100_000)]
    tags: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct CdfArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    route: Route,
    #[command(flatten)]
    bounds: Bounds,
    /// Add the path law under independent per-node sojourns (acyclic networks).
    #[arg(long)]
    compare_independent: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    route: Route,
    #[command(flatten)]
    sampling: Sampling,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    route: Route,
    #[command(flatten)]
    bounds: Bounds,
    #[command(flatten)]
    sampling: Sampling,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Io { path: PathBuf, source: std::io::Error },
    Model(SojournError),
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Internal(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Model(e) => match e {
                SojournError::UnstableNetwork { .. } => 5,
                SojournError::NoConvergence { .. }
                | SojournError::AlphaTooSmall { .. }
                | SojournError::StateSpaceTooLarge(_)
                | SojournError::MaxEventsExceeded(_)
                | SojournError::TooFewSamples { .. } => 6,
                SojournError::NotAcyclic | SojournError::NotOvertakeFree | SojournError::NotTandem => 7,
                _ => 4,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage: {msg}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Model(e) => write!(f, "{}", one_based(e)),
            CliError::Internal(msg) => write!(f, "internal error: {msg}"),
        }
    }
}

/// Library errors count nodes from 0; the command line counts from 1.
fn one_based(e: &SojournError) -> SojournError {
    match e.clone() {
        SojournError::UnstableNetwork { node, rho } => SojournError::UnstableNetwork { node: node + 1, rho },
        SojournError::RowSumExceedsOne { row, sum } => SojournError::RowSumExceedsOne { row: row + 1, sum },
        SojournError::RepeatedNode(node) => SojournError::RepeatedNode(node + 1),
        SojournError::NodeOutOfRange { node, nodes } => SojournError::NodeOutOfRange { node: node + 1, nodes },
        other => other,
    }
}

impl From<SojournError> for CliError {
    fn from(e: SojournError) -> Self {
        CliError::Model(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(args) => commands::analyze(&args),
        Command::Cdf(args) => commands::cdf(&args),
        Command::Simulate(args) => commands::simulate(&args),
        Command::Compare(args) => commands::compare(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("jsojourn: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
