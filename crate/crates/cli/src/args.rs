use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use depmeasures::measures::Mode;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "depmeasures", version, about = "Dependence measures between finite sigma-fields")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Output format; csv is available for search traces and the lemma7 grid.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub format: Format,
    /// Write to FILE instead of stdout.
    #[arg(long, value_name = "FILE", global = true)]
    pub out: Option<PathBuf>,
    /// Rescale input matrices to total mass one.
    #[arg(long, global = true)]
    pub normalize: bool,
    /// Leave the manifest timestamps out so reruns are byte-identical.
    #[arg(long, global = true)]
    pub no_timestamps: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// psi, lambda, tau and rho of a joint matrix.
    Measures(MeasuresArgs),
    /// The two-atom (Y1, Y2) pair with correlation t.
    Yy(YyArgs),
    /// Kronecker product (independent join) of two matrices.
    Kron(KronArgs),
    /// Evaluate one inequality check.
    Check(CheckArgs),
    /// Randomized inequality checks.
    Fuzz(FuzzArgs),
    /// Join a base with an independent yy pair.
    Embellish(EmbellishArgs),
    /// Gaussian orthant probability and limit correlation at r.
    Orthant(OrthantArgs),
    /// Indicator correlation of thresholded normalized sums.
    Theorem6(Theorem6Args),
    /// Scan n for a threshold-sum correlation above t.
    WitnessSearch(WitnessSearchArgs),
    /// Shape of t(1 - log t) - sin(pi t / 2) on (0, 1).
    Lemma7(Lemma7Args),
    /// Annealed search over joint matrices.
    Search(SearchArgs),
}

impl Command {
    pub fn name(&self) -> String {
        match self {
            Command::Measures(_) => "measures".into(),
            Command::Yy(_) => "yy".into(),
            Command::Kron(_) => "kron".into(),
            Command::Check(a) => format!("check {}", a.kind.name()),
            Command::Fuzz(_) => "fuzz".into(),
            Command::Embellish(_) => "embellish".into(),
            Command::Orthant(_) => "orthant".into(),
            Command::Theorem6(_) => "theorem6".into(),
            Command::WitnessSearch(_) => "witness-search".into(),
            Command::Lemma7(_) => "lemma7".into(),
            Command::Search(a) => format!("search {}", a.target.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    Exact,
    Heuristic,
    Auto,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Exact => Mode::Exact,
            ModeArg::Heuristic => Mode::Heuristic,
            ModeArg::Auto => Mode::Auto,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct MeasuresArgs {
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
    pub mode: ModeArg,
}

#[derive(Debug, Args, Serialize)]
pub struct YyArgs {
    #[arg(long)]
    pub t: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct KronArgs {
    #[arg(long, value_name = "FILE")]
    pub in1: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub in2: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Chain,
    TwoAtom,
    Peyre,
    CsakiFischer,
    Cousin,
    CousinMulti,
}

impl CheckKind {
    pub fn name(&self) -> &'static str {
        match self {
            CheckKind::Chain => "chain",
            CheckKind::TwoAtom => "two-atom",
            CheckKind::Peyre => "peyre",
            CheckKind::CsakiFischer => "csaki-fischer",
            CheckKind::Cousin => "cousin",
            CheckKind::CousinMulti => "cousin-multi",
        }
    }

    /// Number of matrices the check takes; `None` means two or more.
    pub fn arity(&self) -> Option<usize> {
        match self {
            CheckKind::Chain | CheckKind::TwoAtom | CheckKind::Peyre => Some(1),
            CheckKind::CsakiFischer | CheckKind::Cousin => Some(2),
            CheckKind::CousinMulti => None,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct CheckArgs {
    #[arg(value_enum)]
    pub kind: CheckKind,
    /// Input matrix; repeat for checks on several matrices.
    #[arg(long = "in", value_name = "FILE")]
    pub input: Vec<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub in1: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub in2: Option<PathBuf>,
}

impl CheckArgs {
    pub fn inputs(&self) -> Vec<PathBuf> {
        let mut v = Vec::new();
        v.extend(self.in1.clone());
        v.extend(self.in2.clone());
        v.extend(self.input.iter().cloned());
        v
    }
}

#[derive(Debug, Args, Serialize)]
pub struct FuzzArgs {
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    /// Shape as IxJ; repeatable. Defaults to 2x2 through 5x5.
    #[arg(long, value_name = "IxJ")]
    pub shape: Vec<String>,
    /// dense, sparse or near_independent; repeatable. Defaults to dense and sparse.
    #[arg(long)]
    pub style: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
pub struct EmbellishArgs {
    #[arg(long, value_name = "FILE")]
    pub base: PathBuf,
    #[arg(long)]
    pub t: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct OrthantArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodArg {
    Exact,
    Mc,
}

/// Base matrix with optional scores; scores may also come from the file.
#[derive(Debug, Args, Serialize)]
pub struct ScoreArgs {
    #[arg(long, value_name = "FILE")]
    pub base: PathBuf,
    /// Row scores, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub g: Option<Vec<f64>>,
    /// Column scores, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub h: Option<Vec<f64>>,
}

#[derive(Debug, Args, Serialize)]
pub struct Theorem6Args {
    #[command(flatten)]
    #[serde(flatten)]
    pub scores: ScoreArgs,
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::Exact)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
pub struct WitnessSearchArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub scores: ScoreArgs,
    #[arg(long)]
    pub t: f64,
    #[arg(long)]
    pub nmax: usize,
    /// Monte Carlo samples for n beyond exact reach.
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
pub struct Lemma7Args {
    #[arg(long, default_value_t = 100_000)]
    pub grid: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchTarget {
    Rho,
    TensorGap,
}

impl SearchTarget {
    pub fn name(&self) -> &'static str {
        match self {
            SearchTarget::Rho => "rho",
            SearchTarget::TensorGap => "tensor-gap",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SearchArgs {
    #[arg(value_enum)]
    pub target: SearchTarget,
    /// IxJ; defaults to 2x8 with --two-atom and 4x4 otherwise.
    #[arg(long, value_name = "IxJ")]
    pub shape: Option<String>,
    #[arg(long, default_value_t = 0.1)]
    pub tau_cap: f64,
    #[arg(long)]
    pub two_atom: bool,
    #[arg(long, default_value_t = 1000)]
    pub budget: usize,
    #[arg(long, default_value_t = 4)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0.1)]
    pub step_scale: f64,
    /// Largest Kronecker power for tensor-gap.
    #[arg(long, default_value_t = 2)]
    pub nmax: usize,
    #[arg(long)]
    pub seed: Option<u64>,
}
