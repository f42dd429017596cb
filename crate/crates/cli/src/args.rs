use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use famsynth::synthesis::{QueueOrder, Strategy};

/// Synthesis over finite families of Markov chains.
#[derive(Debug, Parser)]
#[command(name = "famsynth", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check every member with the exact solver.
    Check(BaselineArgs),
    /// Solve the all-in-one MDP once per direction.
    Allinone(BaselineArgs),
    /// Enumerate consistent schedulers of the quotient, one per member.
    Enum(BaselineArgs),
    /// Abstraction refinement over the quotient MDP.
    Synth(SynthArgs),
    /// Emit the reward feasibility problem as SMT-LIB2, optionally solving it.
    SmtExport(SmtArgs),
    /// Print a random family document.
    Gen(GenArgs),
    /// Run several approaches on one input and tabulate their cost.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Threshold,
    Max,
    Min,
    Feasibility,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Auto,
    Variance,
    Consistency,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Auto => Strategy::Auto,
            StrategyArg::Variance => Strategy::VarianceFirst,
            StrategyArg::Consistency => Strategy::ConsistencyFirst,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QueueArg {
    Fifo,
    Largest,
}

impl From<QueueArg> for QueueOrder {
    fn from(q: QueueArg) -> Self {
        match q {
            QueueArg::Fifo => QueueOrder::Fifo,
            QueueArg::Largest => QueueOrder::LargestFirst,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// `.fmc` document; `-` or nothing reads standard input.
    pub input: Option<PathBuf>,
    /// Name of the specification to use (default: the first suitable one).
    #[arg(long)]
    pub spec: Option<String>,
    #[arg(long, value_enum, default_value = "json")]
    pub out: OutputFormat,
    /// Convergence threshold of value iteration.
    #[arg(long, default_value_t = 1e-8)]
    pub epsilon: f64,
    /// Include wall-clock timings in the report.
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Clone, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Upper bound on the family size (or product size for `allinone`).
    #[arg(long)]
    pub cap: Option<u128>,
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Clone, Args)]
pub struct RefineArgs {
    /// Importance cutoff in [0, 1].
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
    #[arg(long, value_enum, default_value = "auto")]
    pub strategy: StrategyArg,
    #[arg(long, value_enum, default_value = "fifo")]
    pub queue: QueueArg,
    /// Slack around engine values before a subfamily is decided.
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
    /// Maximum number of analysed subfamilies.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Analyse queued subfamilies concurrently.
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value = "threshold")]
    pub mode: Mode,
    #[command(flatten)]
    pub refine: RefineArgs,
    /// Write the refinement trace as JSON lines.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Write the quotient MDP in the `.mdp` dump format.
    #[arg(long)]
    pub dump_quotient: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SmtArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Run the solver and print the decoded member instead of the problem.
    #[arg(long)]
    pub solve: bool,
    /// Solver command; the problem file path is appended.
    #[arg(long, env = "FAMSYNTH_SOLVER", default_value = "z3")]
    pub solver: String,
    /// Solver timeout in seconds.
    #[arg(long, default_value_t = 60)]
    pub timeout: u64,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub states: usize,
    #[arg(long, default_value_t = 3)]
    pub params: usize,
    #[arg(long, default_value_t = 3)]
    pub domain: usize,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub refine: RefineArgs,
    /// Skip baselines for families above this size.
    #[arg(long)]
    pub cap: Option<u128>,
}
