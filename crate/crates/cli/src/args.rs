use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "pbrownian", version, about = "Barenblatt fields, p-Brownian particle ensembles and radial solvers")]
pub struct Cli {
    /// Worker threads (default: all cores). Never changes results.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the derived constants for (d, p) as JSON.
    Params(ModelArgs),
    /// Simulate a particle ensemble and write its snapshots.
    Simulate(SimulateCmd),
    /// Run a verification suite and write report.json.
    Verify(VerifyCmd),
    /// Solve the nonlinear or linearized radial equation.
    Pde(PdeCmd),
    /// Re-run the command recorded in a manifest.json.
    Replay(ReplayCmd),
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, default_value_t = 4.0)]
    pub p: f64,
}

#[derive(Clone, Debug, Default, Args)]
pub struct OutputArgs {
    /// Output directory (default: $PBROWNIAN_OUT/<command>).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overwrite files in a non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    Standard,
    Literal,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Center y, comma separated (default: origin).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub y: Vec<f64>,
    /// Time offset: the marginal at t is w(t + delta0).
    #[arg(long, default_value_t = 0.0)]
    pub delta0: f64,
    /// Warm-start time.
    #[arg(long, default_value_t = pbrownian::sde::DEFAULT_WARM_START)]
    pub t0: f64,
    /// Horizon.
    #[arg(long = "T", default_value_t = 1.0)]
    #[serde(rename = "T")]
    pub horizon: f64,
    /// Time step.
    #[arg(long, default_value_t = 1e-3)]
    pub h: f64,
    #[arg(long, default_value_t = 100_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Extra snapshot times, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub snapshots: Vec<f64>,
    #[arg(long, value_enum, default_value_t = Convention::Standard)]
    pub convention: Convention,
    /// Drift cap of the tamed scheme.
    #[arg(long, default_value_t = pbrownian::sde::DEFAULT_DRIFT_CAP)]
    pub drift_cap: f64,
    /// Normals summed per step (shares noise with runs at h / substeps).
    #[arg(long, default_value_t = 1)]
    pub crn_substeps: usize,
    /// Also write every path at every step (paths.csv).
    #[arg(long)]
    pub record_paths: bool,
}

#[derive(Clone, Debug, Args)]
pub struct SimulateCmd {
    #[command(flatten)]
    pub args: SimulateArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteArg {
    Marginals,
    Support,
    Weakform,
    Exponents,
    Integrability,
    Flow,
    Markov,
    Linearized,
    All,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct VerifyArgs {
    #[arg(value_enum)]
    pub suite: SuiteArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub y: Vec<f64>,
    /// Time offset of the PDE checks (default 0.1 nonlinear, 0.2 linearized).
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub t0: Option<f64>,
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub markov_paths: Option<usize>,
    #[arg(long)]
    pub cells: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override a statistic's tolerance: NAME=VALUE (repeatable).
    #[arg(long = "tol", value_name = "NAME=VALUE")]
    pub tol: Vec<String>,
}

#[derive(Clone, Debug, Args)]
pub struct VerifyCmd {
    #[command(flatten)]
    pub args: VerifyArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdeKind {
    Nonlinear,
    Linearized,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct PdeArgs {
    #[arg(long, value_enum)]
    pub kind: PdeKind,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Initial time offset: start from w(delta) (default 0.1 nonlinear, 0.2 linearized).
    #[arg(long)]
    pub delta: Option<f64>,
    /// Elapsed time (default 1 - delta).
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    #[arg(long, default_value_t = 2000)]
    pub cells: usize,
    /// Domain radius (default 1.25 R(delta + T)).
    #[arg(long)]
    pub r_max: Option<f64>,
    /// Number of evenly spaced output times.
    #[arg(long, default_value_t = 10)]
    pub snapshots: usize,
    #[arg(long, default_value_t = 0.9)]
    pub cfl: f64,
}

#[derive(Clone, Debug, Args)]
pub struct PdeCmd {
    #[command(flatten)]
    pub args: PdeArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Clone, Debug, Args)]
pub struct ReplayCmd {
    pub manifest: PathBuf,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// A replayable command as recorded in manifest.json.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "command", content = "args", rename_all = "snake_case")]
pub enum Recorded {
    Simulate(SimulateArgs),
    Verify(VerifyArgs),
    Pde(PdeArgs),
}

impl Recorded {
    pub fn name(&self) -> String {
        match self {
            Recorded::Simulate(_) => "simulate".into(),
            Recorded::Verify(v) => format!("verify-{}", serde_json::to_value(v.suite).ok().and_then(|s| s.as_str().map(String::from)).unwrap_or_default()),
            Recorded::Pde(p) => format!("pde-{}", if p.kind == PdeKind::Nonlinear { "nonlinear" } else { "linearized" }),
        }
    }
}
