use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "ltv", version, about = "Singular systems of linear time-varying channels")]
pub struct Cli {
    /// JSON configuration for the subcommand.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    /// Overrides the seed of the configuration.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Block length in samples.
    #[arg(long, global = true, value_name = "INT")]
    pub n: Option<usize>,
    /// Grid points per sample in time and per 1/N in frequency.
    #[arg(long, global = true, value_name = "INT")]
    pub oversample: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a random multipath channel model.
    Synth,
    /// Channel matrix and its singular value decomposition.
    Svd(SvdArgs),
    /// Level curves and WKB singular functions at chosen levels.
    Predict(PredictArgs),
    /// Validate predictions against numeric singular vectors.
    Compare(CompareArgs),
    /// Reassigned time-frequency distribution of one singular vector.
    Tfa(TfaArgs),
    /// Block transmission over the singular subchannels.
    Link(LinkArgs),
    /// Area-rule levels, optionally against numeric singular values.
    AreaRule(AreaRuleArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Svd(_) => "svd",
            Command::Predict(_) => "predict",
            Command::Compare(_) => "compare",
            Command::Tfa(_) => "tfa",
            Command::Link(_) => "link",
            Command::AreaRule(_) => "area-rule",
        }
    }
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false, id = "source")]
pub struct SvdSource {
    /// Channel model JSON.
    #[arg(long, value_name = "PATH")]
    pub model: Option<PathBuf>,
    /// Channel matrix file.
    #[arg(long, value_name = "PATH")]
    pub matrix: Option<PathBuf>,
    /// Time-and-band limiter with this one-sided bandwidth (cycles/sample).
    #[arg(long, value_name = "W")]
    pub band_limit: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SvdArgs {
    #[command(flatten)]
    pub source: SvdSource,
    /// Also write the matrix as CSV.
    #[arg(long)]
    pub matrix_csv: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LevelSource {
    /// Levels from the area rule `A(sigma) = n + 1/2`.
    AreaRule,
    /// Numeric singular values from an SVD file.
    Svd,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    /// 1-based singular value indices.
    #[arg(long, value_delimiter = ',', value_name = "I,J,..")]
    pub indices: Vec<usize>,
    /// Explicit levels.
    #[arg(long, value_delimiter = ',', value_name = "SIGMA,..")]
    pub levels: Vec<f64>,
    /// Where index levels come from.
    #[arg(long, value_enum, default_value = "area-rule")]
    pub source: LevelSource,
    /// SVD file, required with `--source svd`.
    #[arg(long, value_name = "PATH")]
    pub svd: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long, value_name = "PATH")]
    pub svd: PathBuf,
    /// Output directory of `predict`.
    #[arg(long, value_name = "DIR")]
    pub predictions: PathBuf,
    /// Compare each prediction against its own WKB model instead of the
    /// numeric singular vector.
    #[arg(long)]
    pub self_reference: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Args)]
pub struct TfaArgs {
    #[arg(long, value_name = "PATH")]
    pub svd: PathBuf,
    /// 1-based index of the singular vector.
    #[arg(long, default_value_t = 1)]
    pub index: usize,
    #[arg(long, value_enum, default_value = "left")]
    pub side: Side,
}

#[derive(Debug, Args)]
pub struct LinkArgs {
    /// Channel model JSON; the identity channel when absent.
    #[arg(long, value_name = "PATH")]
    pub model: Option<PathBuf>,
    /// Es/N0 values in dB; each replaces the configured noise level.
    #[arg(long, value_delimiter = ',', value_name = "DB,..", allow_negative_numbers = true)]
    pub sweep: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct AreaRuleArgs {
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    /// SVD file whose singular values are tabulated against `A(sigma)`.
    #[arg(long, value_name = "PATH")]
    pub svd: Option<PathBuf>,
}
