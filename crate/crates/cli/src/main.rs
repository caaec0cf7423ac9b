use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod run;

/// Equilibria of the click-fraud game on streaming platforms.
#[derive(Parser, Debug)]
#[command(name = "fraudgame", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Classify the regime and solve for the equilibrium.
    Solve(SolveArgs),
    /// Sweep lambda0, alpha or d_hat and emit one CSV row per point.
    Sweep(SweepArgs),
    /// Compare the fraud equilibrium with the fraud-free profile.
    Fairness(CommonArgs),
    /// Equilibrium under the weighted pro-rata/user-centric rule.
    Weighted(WeightedArgs),
    /// Effect of a minimum-share qualification threshold.
    Policy(PolicyArgs),
    /// Cross-check the solvers against the independent oracle.
    OracleCheck(OracleArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Scenario JSON, or a reduced game `{"d": [...], "xi": .., "V": ..}`.
    #[arg(long)]
    input: PathBuf,
    /// Output directory; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output formats, comma separated. Defaults to json on stdout, json and csv with --out.
    #[arg(long, value_enum, value_delimiter = ',')]
    format: Vec<Format>,
    /// Rescale each user's stream shares to sum to 1 before reducing.
    #[arg(long)]
    renormalize: bool,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Grid-check the emitted equilibrium; failure exits 3.
    #[arg(long)]
    verify: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// lambda0, alpha or d_hat.
    #[arg(long)]
    param: String,
    #[arg(long, allow_negative_numbers = true)]
    min: f64,
    #[arg(long, allow_negative_numbers = true)]
    max: f64,
    #[arg(long)]
    steps: usize,
    /// Grid-check every swept equilibrium (lambda0 and alpha sweeps).
    #[arg(long)]
    verify: bool,
    /// Accepted for reproducible invocations; sweeps are deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct WeightedArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Blend weight in (0, 1]; only the fraud-free bound is reported when omitted.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    verify: bool,
}

#[derive(Args, Debug)]
struct PolicyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Threshold on the post-fraud share `d_i + t_i`.
    #[arg(long, conflicts_with = "lambda_hat")]
    d_hat: Option<f64>,
    /// Threshold in streams per artist; converted with the raw constants.
    #[arg(long)]
    lambda_hat: Option<f64>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// Check this game only; random fraud-regime games otherwise.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',')]
    format: Vec<Format>,
    #[arg(long, default_value_t = 1000)]
    games: usize,
    /// Seed for games and starting profiles; falls back to FRAUDGAME_SEED.
    #[arg(long)]
    seed: Option<u64>,
    /// Add the grid equilibrium check.
    #[arg(long)]
    verify: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
