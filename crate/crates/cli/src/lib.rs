//! Command-line front end: system description files in, JSON/CSV artifacts out.
//!
//! Exit codes are a stable contract:
//!
//! | code | meaning                                         |
//! |------|-------------------------------------------------|
//! | 0    | success / certified / certificate accepted      |
//! | 2    | schema, argument or I/O error                   |
//! | 3    | not certified (inconclusive) / check rejected   |
//! | 4    | solver failure                                  |
//! | 5    | integration failure                             |

pub mod artifacts;
pub mod commands;
pub mod schema;

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NOT_CERTIFIED: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;
pub const EXIT_INTEGRATION: i32 = 5;

#[derive(Debug)]
pub enum CliError {
    Schema(String),
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    Lib(lurepwa::Error),
}

impl CliError {
    pub fn schema(msg: impl Into<String>) -> Self {
        CliError::Schema(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        use lurepwa::Error as E;
        match self {
            CliError::Schema(_) | CliError::Io { .. } => EXIT_USAGE,
            CliError::Lib(e) => match e.root() {
                E::Argument(_)
                | E::Dimension(_)
                | E::MalformedNonlinearity(_)
                | E::AssumptionViolation(_)
                | E::Parse { .. } => EXIT_USAGE,
                E::Integration { .. } => EXIT_INTEGRATION,
                _ => EXIT_SOLVER,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Schema(m) => write!(f, "schema violation: {m}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<lurepwa::Error> for CliError {
    fn from(e: lurepwa::Error) -> Self {
        CliError::Lib(e)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "lurepwa",
    version,
    about = "Incremental stability certificates for Lur'e systems"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Overrides applied on top of the description file.
#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// Target Lipschitz bound on the approximation error.
    #[arg(long, global = true)]
    pub eta_ref: Option<f64>,
    /// Use exactly N regions (odd) instead of deriving N from eta_ref.
    #[arg(
        long = "force-N",
        visible_alias = "force-n",
        global = true,
        value_name = "N"
    )]
    pub force_n: Option<usize>,
    /// Seed for randomized validation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Tolerance: solver feasibility (approx/certify), independent check (check),
    /// decrease check (simulate).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// `clarabel` or `command:<program> [args]`.
    #[arg(long, global = true)]
    pub backend: Option<String>,
    /// Directory for written artifacts.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the piecewise-affine approximation and a plotting table.
    Approx { input: PathBuf },
    /// Run the full pipeline and write a report (and certificate if found).
    Certify { input: PathBuf },
    /// Simulate trajectory pairs of the original system.
    Simulate(SimulateArgs),
    /// Re-verify a stored certificate.
    Check {
        certificate: PathBuf,
        /// Random samples per cell for the bound/continuity spot check (0 skips it).
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Print a summary of a report, certificate or check artifact.
    Report { artifact: PathBuf },
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub input: PathBuf,
    /// Certificate artifact; adds V along the trajectories and the decrease check.
    #[arg(long)]
    pub certificate: Option<PathBuf>,
    /// First initial state, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    /// Second initial state, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub xt0: Option<Vec<f64>>,
    /// Horizon T.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Simulate this many seeded random pairs instead of one.
    #[arg(long)]
    pub pairs: Option<usize>,
}

pub fn run(cli: Cli) -> Result<i32, CliError> {
    let g = &cli.global;
    match cli.command {
        Command::Approx { input } => commands::approx(&input, g),
        Command::Certify { input } => commands::certify(&input, g),
        Command::Simulate(args) => commands::simulate(&args, g),
        Command::Check {
            certificate,
            samples,
        } => commands::check(&certificate, samples, g),
        Command::Report { artifact } => commands::report(&artifact),
    }
}
