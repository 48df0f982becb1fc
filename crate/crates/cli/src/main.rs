//! `tcbve`: cumulant solver, path simulator and verification suite for
//! two-type branching processes in varying environments.
//!
//! Exit codes: 0 success, 1 usage or runtime error, 2 invalid environment,
//! 3 failed verification gates.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use tcbve::{SmallJumpMode, Vec2};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Runtime(String),
    #[error("verification failed")]
    GatesFailed,
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Runtime(_) => 1,
            CliError::Invalid(_) => 2,
            CliError::GatesFailed => 3,
        }
    }
}

pub type CliResult = Result<(), CliError>;

#[derive(Debug, Parser)]
#[command(name = "tcbve", version, about, propagate_version = true)]
struct Cli {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true, env = "TCBVE_THREADS", value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check an environment (and weight measure) against the model constraints.
    Validate(ConfigArgs),
    /// Solve the backward cumulant system; CSV r,v1,v2,is_atom,v1_left,v2_left.
    Cumulant(CumulantArgs),
    /// First moments and their bound; CSV t,m1,m2,bound1,bound2.
    Moments(MomentsArgs),
    /// Monte Carlo ensemble statistics and optional trajectory dump.
    Simulate(SimulateArgs),
    /// Laplace functional of the weight measure in the config's `zeta` block.
    Functional(FunctionalArgs),
    /// Extinction probability from the λ → ∞ limit, optionally with Monte Carlo.
    Extinction(ExtinctionArgs),
    /// Run verification scenarios and write a JSON verdict report.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Config file (TOML, or JSON when the name ends in .json).
    pub config: PathBuf,
    /// Also write the effective config, flags merged in, to this file.
    #[arg(long, value_name = "FILE")]
    pub dump_config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CumulantArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Terminal time t.
    #[arg(long)]
    pub t: Option<f64>,
    /// Terminal value λ as `l1,l2`.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub lambda: Option<Vec2>,
    /// Left end r of the solution interval.
    #[arg(long, default_value_t = 0.0)]
    pub from: f64,
    /// Output CSV file; standard output if absent.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MomentsArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long)]
    pub t: Option<f64>,
    /// Initial state as `x1,x2`.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub x0: Option<Vec2>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Number of paths.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Step length h.
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Small-jump threshold ε for stable components.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, value_enum)]
    pub small_jumps: Option<SmallJumps>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SmallJumps {
    Drop,
    Gaussian,
}

impl From<SmallJumps> for SmallJumpMode {
    fn from(m: SmallJumps) -> Self {
        match m {
            SmallJumps::Drop => SmallJumpMode::DropMartingale,
            SmallJumps::Gaussian => SmallJumpMode::GaussianApprox,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub x0: Option<Vec2>,
    /// Checkpoint times as `t1,t2,...`; defaults to t.
    #[arg(long, value_delimiter = ',')]
    pub checkpoints: Option<Vec<f64>>,
    /// File with one `l1,l2` pair per line.
    #[arg(long, value_name = "FILE")]
    pub lambda_grid: Option<PathBuf>,
    /// Format of the statistics.
    #[arg(long, value_enum, default_value = "csv")]
    pub out: Format,
    /// Statistics file; standard output if absent.
    #[arg(long, short, value_name = "FILE")]
    pub output: Option<PathBuf>,
    /// Write one trajectory as CSV t,x1,x2,is_atom,absorbed.
    #[arg(long, value_name = "FILE")]
    pub trajectory: Option<PathBuf>,
    /// Path index of the dumped trajectory.
    #[arg(long, default_value_t = 0)]
    pub path_id: u64,
}

#[derive(Debug, Args)]
pub struct FunctionalArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub from: f64,
    /// Terminal value λ; zero if absent.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub lambda: Option<Vec2>,
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub x0: Option<Vec2>,
    /// Add a Monte Carlo estimate, sized by --paths and --step.
    #[arg(long)]
    pub mc: bool,
    /// Output JSON file; standard output if absent.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExtinctionArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub x0: Option<Vec2>,
    /// Compare with the Monte Carlo extinction frequency.
    #[arg(long)]
    pub mc: bool,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Run the built-in suite.
    #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
    pub suite: bool,
    /// Run the scenario described by a config file (repeatable).
    #[arg(long, value_name = "FILE")]
    pub scenario: Vec<PathBuf>,
    /// Report file; standard output if absent.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Replace every scenario seed by one derived from this value.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run only scenarios whose name contains this string.
    #[arg(long, value_name = "PATTERN")]
    pub only: Option<String>,
}

fn parse_pair(s: &str) -> Result<Vec2, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(format!("expected two comma-separated numbers, got `{s}`"));
    }
    let a = parts[0].parse::<f64>().map_err(|e| format!("`{}`: {e}", parts[0]))?;
    let b = parts[1].parse::<f64>().map_err(|e| format!("`{}`: {e}", parts[1]))?;
    Ok([a, b])
}

fn run(cli: Cli) -> CliResult {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;
    }
    match cli.command {
        Command::Validate(a) => commands::validate(&a),
        Command::Cumulant(a) => commands::cumulant(&a),
        Command::Moments(a) => commands::moments(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Functional(a) => commands::functional(&a),
        Command::Extinction(a) => commands::extinction(&a),
        Command::Verify(a) => commands::verify(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !matches!(e, CliError::GatesFailed) {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.code())
        }
    }
}
