use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "coalesce", version, about = "Multi-agent control with multiplicity-weighted costs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Cost breakdown of a given ensemble.
    Evaluate(EvaluateArgs),
    /// Search for a minimizing ensemble, optionally over a range of horizons.
    Solve(SolveArgs),
    /// Solve over a range of horizons and tabulate the first merge.
    Sweep(SweepArgs),
    /// Closed-form and brute-force ground truth.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Check the dynamic programming principle along an ensemble.
    DppCheck(DppCheckArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Format {
    Json,
    Csv,
    #[default]
    Both,
}

impl Format {
    pub fn json(self) -> bool {
        self != Format::Csv
    }

    pub fn csv(self) -> bool {
        self != Format::Json
    }
}

#[derive(Args, Debug, Clone)]
pub struct Output {
    /// Directory for emitted files; created if missing.
    #[arg(long)]
    pub out: PathBuf,

    #[arg(long, value_enum, default_value_t = Format::Both)]
    pub format: Format,
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    /// Solver configuration JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Overrides the seeds of the scenario and the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub scenario: PathBuf,

    #[arg(long)]
    pub ensemble: PathBuf,

    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[arg(long)]
    pub scenario: PathBuf,

    /// Horizon sweep `T=a:b:n`: n evenly spaced end times from a to b.
    #[arg(long)]
    pub sweep: Option<String>,

    #[command(flatten)]
    pub solver: SolverArgs,

    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    pub scenario: PathBuf,

    /// `T=a:b:n`
    #[arg(long)]
    pub sweep: String,

    #[command(flatten)]
    pub solver: SolverArgs,

    #[command(flatten)]
    pub output: Output,
}

#[derive(Subcommand, Debug)]
pub enum OracleCommand {
    /// Two half-masses meeting on their way to `(R, 0)`.
    Example1(Example1Args),
    /// Exhaustive search over lattice waypoints.
    Brute(BruteArgs),
}

#[derive(Args, Debug)]
pub struct Example1Args {
    /// Target abscissa.
    #[arg(long = "r", short = 'R')]
    pub r: f64,

    /// Horizon end.
    #[arg(long = "t", short = 'T')]
    pub t: f64,

    /// Intervals of the grid the minimizer is sampled on.
    #[arg(long = "m", short = 'M', default_value_t = 200)]
    pub m: usize,

    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct BruteArgs {
    #[arg(long)]
    pub scenario: PathBuf,

    /// Lattice JSON `{"points": [[x, ...], ...]}`.
    #[arg(long, conflicts_with = "line")]
    pub lattice: Option<PathBuf>,

    /// Integer points `lo:hi` on the line.
    #[arg(long, allow_hyphen_values = true)]
    pub line: Option<String>,

    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct DppCheckArgs {
    #[arg(long)]
    pub scenario: PathBuf,

    /// Ensemble to follow; the solver's minimizer when omitted.
    #[arg(long)]
    pub ensemble: Option<PathBuf>,

    /// Nodes at which `ell` is sampled, end points included.
    #[arg(long, default_value_t = 11)]
    pub points: usize,

    /// Perturbed competitors per gap check.
    #[arg(long, default_value_t = 8)]
    pub perturbations: usize,

    #[command(flatten)]
    pub solver: SolverArgs,

    #[command(flatten)]
    pub output: Output,
}
