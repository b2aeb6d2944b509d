use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "mfmgcn", version, about = "Multi-graph spatio-temporal weather forecasting")]
pub struct Cli {
    /// Directory searched for relative input paths not found in the working directory.
    #[arg(long, global = true, env = "MFMGCN_DATA_DIR")]
    pub data_dir: Option<PathBuf>,

    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Screen stations, fill gaps and write a packed dataset.
    Preprocess(PreprocessArgs),
    /// Generate a synthetic station dataset.
    Synth(SynthArgs),
    /// Build the static distance, neighbour and pattern graphs.
    Graphs(GraphsArgs),
    /// Train a model and write a checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint, a baseline or a forecast file.
    Eval(EvalArgs),
    /// Train the graph-fusion grid or the neighbour-count sweep.
    Ablate(AblateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    Csv,
    Packed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CodeSet {
    /// The 999999-style sentinels of the station archive.
    Weather2k,
    None,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = InputFormat::Csv)]
    pub format: InputFormat,
    #[arg(long, default_value_t = 0.01)]
    pub max_missing: f64,
    #[arg(long, default_value_t = 0.01)]
    pub max_default: f64,
    #[arg(long, value_enum, default_value_t = CodeSet::Weather2k)]
    pub default_codes: CodeSet,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub t: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON file with any generator fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Also write a per-station CSV directory.
    #[arg(long)]
    pub csv_dir: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DistanceModeArg {
    GreatCircle,
    Euclidean3d,
}

#[derive(Debug, Args)]
pub struct GraphsArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// `auto` or a bandwidth in km.
    #[arg(long)]
    pub sigma: Option<String>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub na: Option<usize>,
    #[arg(long, value_enum)]
    pub distance_mode: Option<DistanceModeArg>,
    /// Comma-separated factors averaged into the pattern graph.
    #[arg(long)]
    pub pattern_factors: Option<String>,
    /// Train:val:test proportions; the pattern graph sees only the train part.
    #[arg(long)]
    pub split_ratio: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `.json` writes JSON, anything else the packed format.
    #[arg(long)]
    pub out: PathBuf,
}

/// Settings shared by everything that builds forecast windows.
#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub factor: Option<String>,
    /// Comma-separated extra input factors.
    #[arg(long)]
    pub inputs: Option<String>,
    #[arg(long)]
    pub wprime: Option<usize>,
    #[arg(long)]
    pub w: Option<usize>,
    #[arg(long)]
    pub split_ratio: Option<String>,
    /// Comma-separated graph slots, e.g. `D,N,P,L,K`.
    #[arg(long)]
    pub graph_set: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub space: Option<SpaceArg>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SpaceArg {
    Normalized,
    Physical,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub exp: ExperimentArgs,
    #[arg(long)]
    pub graphs: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BaselineArg {
    Persistence,
    Linear,
    Ridge,
    Krr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub exp: ExperimentArgs,
    #[arg(long, value_enum, conflicts_with_all = ["checkpoint", "pred"])]
    pub baseline: Option<BaselineArg>,
    /// Regularization strength for ridge and kernel ridge.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// RBF width for kernel ridge; defaults to the inverse input variance.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, requires = "graphs", conflicts_with = "pred")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub graphs: Option<PathBuf>,
    /// Score a packed forecast file instead of running a forecaster.
    #[arg(long)]
    pub pred: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-horizon MAE and RMSE as CSV.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    /// Write the forecasts as a packed file.
    #[arg(long)]
    pub save_pred: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GridArg {
    /// All thirteen fusion selections.
    Fusion,
    /// Each graph alone plus all five.
    Singles,
    /// Neighbour counts with the configured fusion.
    NaSweep,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub exp: ExperimentArgs,
    #[arg(long, value_enum, default_value_t = GridArg::Fusion)]
    pub grid: GridArg,
    /// Prebuilt graphs; built from the data with default settings when absent.
    #[arg(long)]
    pub graphs: Option<PathBuf>,
    /// Comma-separated seeds; each row averages over them.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long, default_value = "5,10,15,20,25")]
    pub na_values: String,
    #[arg(long)]
    pub out: PathBuf,
}
