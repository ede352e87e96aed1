//! `pirsim`: capacity numbers, query tables, simulated retrievals and audits
//! for private information retrieval with partially known side information.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pir_prefetch::scheme::Mutation;

#[derive(Debug, Parser)]
#[command(
    name = "pirsim",
    version,
    about = "PIR with partially known private side information"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimal normalized download cost D* and capacity C = 1/D*.
    Capacity(Common),
    /// Query, side-information, subpacketization and code-length counts.
    Counts(Common),
    /// Query table for one retrieval, one column per database.
    Table(RunArgs),
    /// Simulated retrieval with random messages, decoded and checked.
    Retrieve(RetrieveArgs),
    /// Privacy and capacity audits; exits 1 if any audit fails.
    Audit(AuditArgs),
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// Number of databases.
    #[arg(short = 'N', value_name = "N")]
    databases: Option<usize>,
    /// Number of messages.
    #[arg(short = 'K', value_name = "K")]
    messages: Option<usize>,
    /// Number of cached messages (a multiple of N for tables and retrievals).
    #[arg(short = 'M', value_name = "M")]
    cache: Option<usize>,
    /// Master seed; every random choice derives from it.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// key = value settings file; flags take precedence.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Clone, Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Desired message, one-based (default: random admissible one).
    #[arg(long)]
    theta: Option<usize>,
    /// Prefetch plan JSON, e.g. {"1": [3], "2": [4]} (default: random uniform plan).
    #[arg(long, value_name = "FILE")]
    plan: Option<PathBuf>,
    #[arg(long, value_enum)]
    layout: Option<LayoutArg>,
    /// Testing only: build the table with a deliberate defect.
    #[arg(long, value_name = "MUTATION")]
    mutate: Option<Mutation>,
}

#[derive(Debug, Clone, Args)]
struct RetrieveArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Field width w of GF(2^w) (default: smallest that fits the code).
    #[arg(long)]
    width: Option<u32>,
    /// Write the transcript JSON here.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct AuditArgs {
    #[command(flatten)]
    common: Common,
    /// Audit a single point instead of the standard suite, e.g. `--grid N=2 K=4 M=2`.
    #[arg(long, num_args = 1..=3, value_name = "KEY=VALUE")]
    grid: Vec<String>,
    /// Samples per situation for the statistical audit.
    #[arg(long)]
    samples: Option<usize>,
    /// Significance level of the statistical audit.
    #[arg(long)]
    alpha: Option<f64>,
    /// Testing only: audit a deliberately defective generator.
    #[arg(long, value_name = "MUTATION")]
    mutate: Option<Mutation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Format as ValueEnum>::from_str(s, true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LayoutArg {
    Randomized,
    Canonical,
}

impl std::str::FromStr for LayoutArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <LayoutArg as ValueEnum>::from_str(s, true)
    }
}

/// Why a command did not succeed, mapped to the exit status.
#[derive(Debug)]
enum Failure {
    /// Bad flags, files or parameters: exit 2.
    Usage(anyhow::Error),
    /// A decode mismatch or failed audit: exit 1.
    Verification(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

impl From<pir_prefetch::Error> for Failure {
    fn from(e: pir_prefetch::Error) -> Self {
        use pir_prefetch::Error as E;
        match e {
            E::Reconstruct(_) | E::Peel(_) | E::Internal(_) => {
                Failure::Verification(format!("error: {e}\n"))
            }
            _ => Failure::Usage(e.into()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Capacity(c) => commands::capacity(&c),
        Command::Counts(c) => commands::counts(&c),
        Command::Table(a) => commands::table(&a),
        Command::Retrieve(a) => commands::retrieve(&a),
        Command::Audit(a) => commands::audit(&a),
    };
    match result {
        Ok(output) => {
            print!("{output}");
            ExitCode::SUCCESS
        }
        Err(Failure::Verification(output)) => {
            print!("{output}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
