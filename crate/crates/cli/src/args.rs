use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gpq_core::{Method, PartitionKind, ReconstructMode};

#[derive(Debug, Parser)]
#[command(
    name = "gpq",
    version,
    about = "Compress embedding tables with PQ / Gaussian PQ"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Quantize an embedding file into a GPQE container.
    Compress(CompressArgs),
    /// Rebuild an embedding file from a GPQE container.
    Decompress(DecompressArgs),
    /// Print the header and size accounting of a GPQE container.
    Info(InfoArgs),
    /// Generate a random unit-norm embedding table.
    Rwe(RweArgs),
    /// Compare two embedding files.
    Compare(CompareArgs),
    /// Compress and evaluate over a list of group/cluster settings.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FileFormat {
    /// word2vec text: `<count> <dim>` header, then `token v1 .. vn` lines.
    Text,
    /// Headerless little-endian binary32, row-major.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Pq,
    Gpq,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Pq => Method::Pq,
            MethodArg::Gpq => Method::Gpq,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Structured,
    Unified,
}

impl From<SchemeArg> for PartitionKind {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Structured => PartitionKind::Structured,
            SchemeArg::Unified => PartitionKind::Unified,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Mean,
    Sample,
}

impl From<ModeArg> for ReconstructMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Mean => ReconstructMode::Mean,
            ModeArg::Sample => ReconstructMode::Sample,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum ReportFormat {
    #[default]
    Text,
    Json,
}

/// How to read an embedding file.
#[derive(Debug, Clone, Args)]
pub struct InputFormat {
    /// Input file format.
    #[arg(long = "input-format", value_enum, default_value = "text")]
    pub format: FileFormat,
    /// Row count (raw input only).
    #[arg(long)]
    pub rows: Option<usize>,
    /// Column count (raw input only).
    #[arg(long)]
    pub cols: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct CompressArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[command(flatten)]
    pub input_format: InputFormat,
    #[arg(long, value_enum, default_value = "gpq")]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value = "unified")]
    pub scheme: SchemeArg,
    /// Number of column groups g; must divide the embedding dimension.
    #[arg(long, short)]
    pub groups: usize,
    /// Clusters per codebook c.
    #[arg(long, short)]
    pub clusters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// K-means restarts per clustering; the best objective is kept.
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    #[arg(long, short)]
    pub output: PathBuf,
    /// Also write the input vocabulary, one token per line.
    #[arg(long)]
    pub vocab_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub report: ReportFormat,
}

#[derive(Debug, Clone, Args)]
pub struct DecompressArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "mean")]
    pub mode: ModeArg,
    /// Sampling seed; defaults to the seed stored in the container.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, short)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value = "raw")]
    pub format: FileFormat,
    /// Token list, one per line; required for text output.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct InfoArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    pub report: ReportFormat,
}

#[derive(Debug, Clone, Args)]
pub struct RweArgs {
    #[arg(long)]
    pub rows: usize,
    #[arg(long)]
    pub cols: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Width m of the optional projection matrix W (cols x m).
    #[arg(long, requires = "projection_out")]
    pub projection_dim: Option<usize>,
    /// Where to write W (raw binary32).
    #[arg(long, requires = "projection_dim")]
    pub projection_out: Option<PathBuf>,
    #[arg(long, short)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value = "raw")]
    pub format: FileFormat,
    /// Token list, one per line; required for text output.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub report: ReportFormat,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub original: PathBuf,
    #[arg(long)]
    pub reconstructed: PathBuf,
    #[command(flatten)]
    pub input_format: InputFormat,
    /// Neighbourhood size for the nearest-neighbour overlap.
    #[arg(long, short, default_value_t = 10)]
    pub k: usize,
    #[arg(long, value_enum, default_value = "text")]
    pub report: ReportFormat,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[command(flatten)]
    pub input_format: InputFormat,
    #[arg(long, value_enum, default_value = "gpq")]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value = "unified")]
    pub scheme: SchemeArg,
    /// Settings as `groups:clusters`, comma separated or repeated.
    #[arg(long = "config", value_delimiter = ',', required = true, value_parser = parse_setting)]
    pub configs: Vec<(usize, usize)>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    #[arg(long, short, default_value_t = 10)]
    pub k: usize,
    /// Run settings concurrently; output order is unchanged.
    #[arg(long)]
    pub parallel: bool,
}

fn parse_setting(s: &str) -> Result<(usize, usize), String> {
    let (g, c) = s
        .split_once(':')
        .ok_or_else(|| format!("expected groups:clusters, got {s:?}"))?;
    let g = g
        .trim()
        .parse()
        .map_err(|_| format!("bad group count in {s:?}"))?;
    let c = c
        .trim()
        .parse()
        .map_err(|_| format!("bad cluster count in {s:?}"))?;
    Ok((g, c))
}
