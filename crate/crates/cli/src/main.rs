use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod bundled;
mod commands;

/// Persistent random walks on the double-infinite comb: simulation, limit
/// laws and Monte Carlo verification of the scaling limits.
///
/// Exit status: 0 on success, 1 when a verification criterion fails, 2 on
/// usage, configuration or I/O errors.
#[derive(Debug, Parser)]
#[command(name = "prwlab", version)]
struct Cli {
    /// Worker threads for replica farms [default: all cores]. Results do not
    /// depend on this value.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Master seed. Falls back to the scenario's own seed (verify), then to
    /// the PRWLAB_SEED environment variable, then to 0.
    #[arg(long, global = true, value_name = "SEED")]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one walk from a comb file and write its trajectory.
    Simulate(SimulateArgs),
    /// Tabulate the arcsine Lamperti density and CDF.
    Density(DensityArgs),
    /// Draw samples or a path from a limit law.
    SampleLimit(SampleLimitArgs),
    /// Run a verification scenario (file path or bundled name).
    Verify(VerifyArgs),
    /// Estimate the drift and tail index from a trajectory CSV.
    Estimate(EstimateArgs),
    /// Fast built-in consistency checks.
    Selftest,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Comb file (TOML with [up], [down] and an optional [graft]).
    #[arg(long, value_name = "FILE")]
    comb: PathBuf,
    /// Number of steps.
    #[arg(long, value_name = "N")]
    horizon: u64,
    /// Step CSV `n,S_n,X_n,A_n`.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Run CSV `index,direction,length` (compact; suits long horizons).
    #[arg(long, value_name = "FILE")]
    runs_out: Option<PathBuf>,
    /// Write the summary report here instead of stdout.
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DensityArgs {
    /// Index α in (0, 1).
    #[arg(long, allow_hyphen_values = true)]
    alpha: f64,
    /// Mean drift m in (−1, 1).
    #[arg(long, allow_hyphen_values = true)]
    m: f64,
    /// Time t > 0.
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// Size of the grid x_i = t(−1 + 2i/(N+1)), i = 1..N.
    #[arg(long, default_value_t = 201, value_name = "N")]
    points: usize,
    /// Explicit comma-separated abscissae instead of the grid.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        conflicts_with = "points"
    )]
    x: Option<Vec<f64>>,
    /// Output CSV [default: stdout].
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LimitLaw {
    /// Marginal of the anomalous diffusion at time t, from subordinator paths.
    Anomalous,
    /// The ratio (T^u − T^d)/(T^u + T^d) of positive stables.
    Ratio,
    /// Strictly stable law at time t.
    Stable,
    /// One path of the anomalous diffusion on [0, t].
    Path,
}

#[derive(Debug, Args)]
struct SampleLimitArgs {
    #[arg(long, value_enum)]
    law: LimitLaw,
    /// Stability index.
    #[arg(long)]
    alpha: f64,
    /// Label balance b in [−1, 1] (anomalous, ratio, path).
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    b: f64,
    /// Skewness β in [−1, 1] (stable).
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// Number of draws.
    #[arg(long, default_value_t = 10_000)]
    count: usize,
    /// Grid points on [0, t] for --law path.
    #[arg(long, default_value_t = 1000)]
    points: usize,
    /// Jump truncation relative to t (anomalous, path).
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    /// Output CSV [default: stdout].
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Scenario file, or the name of a bundled scenario.
    #[arg(required_unless_present = "list")]
    scenario: Option<String>,
    /// Write the report here instead of stdout.
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
    /// List the bundled scenarios and exit.
    #[arg(long)]
    list: bool,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// Step CSV or run CSV as written by `simulate`.
    input: PathBuf,
    /// Fraction of the run lengths used by the Hill estimator.
    #[arg(long, default_value_t = 0.05)]
    k_frac: f64,
    /// Bootstrap resamples for the tail index interval (0 disables).
    #[arg(long, default_value_t = 0)]
    bootstrap: usize,
    /// Write the report here instead of stdout.
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
}

/// Why a command did not succeed.
#[derive(Debug)]
enum Failure {
    /// Bad input of any kind; exit status 2.
    Usage(String),
    /// Ran to completion but some criterion failed; exit status 1.
    Criteria,
}

impl From<prwlab::Error> for Failure {
    fn from(e: prwlab::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn env_seed() -> Result<u64, Failure> {
    match std::env::var("PRWLAB_SEED") {
        Ok(v) => v.trim().parse().map_err(|_| {
            Failure::Usage(format!(
                "PRWLAB_SEED must be an unsigned integer, got `{v}`"
            ))
        }),
        Err(std::env::VarError::NotPresent) => Ok(0),
        Err(e) => Err(Failure::Usage(format!("PRWLAB_SEED: {e}"))),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    let seed = cli.seed;
    let default_seed = || seed.map_or_else(env_seed, Ok);
    match cli.command {
        Command::Simulate(a) => commands::simulate(&a, default_seed()?),
        Command::Density(a) => commands::density(&a),
        Command::SampleLimit(a) => commands::sample_limit(&a, default_seed()?),
        Command::Verify(a) => commands::verify(&a, seed, env_seed),
        Command::Estimate(a) => commands::estimate(&a, default_seed()?),
        Command::Selftest => commands::selftest(default_seed()?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Criteria) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
