//! `rkld`: command-line front end for robust KL divergence computations.
//!
//! Exit codes: 0 success (and `H0` for `test`), 1 `H1` for `test`, 2 usage or
//! input errors, 3 solver non-convergence (the report is still written).

mod commands;
mod report;

use std::fmt::Display;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "rkld", version, about = "Robust KL divergence to Levy balls and the robust universal test")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Levy distance between two distributions.
    Levy(LevyArgs),
    /// Robust divergence of the empirical distribution of a sample file.
    Rkld(RkldArgs),
    /// Robust universal test: H1 iff the robust divergence exceeds the threshold.
    Test(TestArgs),
    /// Monte-Carlo estimate of both error exponents.
    Simulate(SimulateArgs),
    /// Lower and upper envelopes of a Levy ball on a grid (CSV).
    Envelope(EnvelopeArgs),
    /// Supremum of the robust divergence over a Levy ball around a discrete base.
    Supball(SupballArgs),
    /// Levy ball versus TV and KL balls around a continuous nominal.
    #[command(subcommand)]
    Demo(DemoCommand),
}

/// A distribution is given as inline JSON (starting with `{`) or a path to a JSON file.
#[derive(Args)]
pub struct BallArgs {
    /// Nominal distribution (inline JSON or file).
    #[arg(long)]
    pub nominal: String,
    /// Levy-ball radius in (0, 1].
    #[arg(long)]
    pub radius: f64,
}

#[derive(Args)]
pub struct OutArgs {
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct LevyArgs {
    #[arg(long)]
    pub left: String,
    #[arg(long)]
    pub right: String,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args)]
pub struct RkldArgs {
    /// One sample per line; `#` comments and blank lines are skipped.
    #[arg(long)]
    pub samples: PathBuf,
    #[command(flatten)]
    pub ball: BallArgs,
    /// JSON report (the default).
    #[arg(long)]
    pub json: bool,
    /// Also write `atom,a,b,p` rows of the projection.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args)]
pub struct TestArgs {
    #[arg(long)]
    pub samples: PathBuf,
    #[command(flatten)]
    pub ball: BallArgs,
    /// Threshold in nats.
    #[arg(long)]
    pub threshold: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub ball: BallArgs,
    #[arg(long)]
    pub threshold: f64,
    /// Alternative distribution used for the miss rate.
    #[arg(long)]
    pub alt: String,
    /// Increasing sample sizes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    #[arg(long)]
    pub trials: usize,
    /// Master seed; the RKLD_SEED environment variable takes precedence.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; the report does not depend on this.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Include wall-clock `runtime_ms` (makes the report non-reproducible).
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args)]
pub struct EnvelopeArgs {
    #[command(flatten)]
    pub ball: BallArgs,
    /// Grid as `lo:hi:step`.
    #[arg(long, conflicts_with = "t", allow_hyphen_values = true)]
    pub grid: Option<String>,
    /// Explicit points, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub t: Vec<f64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args)]
pub struct SupballArgs {
    /// Discrete base distribution (`"family": "discrete"`).
    #[arg(long)]
    pub base: String,
    /// Radius of the ball around the base.
    #[arg(long)]
    pub delta: f64,
    #[command(flatten)]
    pub ball: BallArgs,
    /// Extra transition points, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub grid: Vec<f64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Subcommand)]
pub enum DemoCommand {
    /// Discretized nominal: Levy-ball value versus the TV-ball lower bound.
    Tv {
        #[command(flatten)]
        ball: BallArgs,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Discretized nominal against a KL ball: always infinite.
    Kl {
        #[arg(long)]
        nominal: String,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        out: OutArgs,
    },
}

/// An error with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Display) -> Self {
        Self { code: 2, message: message.to_string() }
    }

    pub fn internal(message: impl Display) -> Self {
        Self { code: 2, message: format!("internal: {message}") }
    }
}

impl From<rkld_core::Error> for Failure {
    fn from(e: rkld_core::Error) -> Self {
        Failure::usage(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Levy(a) => commands::levy(a),
        Command::Rkld(a) => commands::rkld(a),
        Command::Test(a) => commands::test(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Envelope(a) => commands::envelope(a),
        Command::Supball(a) => commands::supball(a),
        Command::Demo(d) => commands::demo(d),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
