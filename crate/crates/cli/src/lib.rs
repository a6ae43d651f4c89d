//! Library side of the `gpq` command-line tool.
//!
//! Each subcommand is a function writing its report to a caller-supplied
//! sink, so the binary and the tests drive the same code.

pub mod args;
pub mod report;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use gpq_core::codec::{self, ContainerHeader, HEADER_LEN};
use gpq_core::embio::{load_raw, load_word2vec_text, save_raw, save_word2vec_text};
use gpq_core::rwe::{projection_for, rwe_size_report};
use gpq_core::{
    compress, fidelity, reconstruct, rwe_generate, size_report, CompressParams, EmbeddingMatrix,
    FidelityReport, Method, PartitionScheme, ReconstructMode, RweConfig, SizeReport,
};

use args::{
    Cli, Command, CompareArgs, CompressArgs, DecompressArgs, FileFormat, InfoArgs, InputFormat,
    RweArgs, SweepArgs,
};
use report::{
    render, CompareReport, CompressReport, HeaderSummary, InfoReport, RweReport, SizeSummary,
    SweepEntry,
};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_FORMAT: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] gpq_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) if e.is_format() => EXIT_FORMAT,
            CliError::Core(_) | CliError::Io { .. } => EXIT_DATA,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Core(e) => e.kind(),
            CliError::Io { .. } => "io",
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl InputFormat {
    fn validate(&self) -> CliResult<()> {
        match self.format {
            FileFormat::Raw if self.rows.is_none() || self.cols.is_none() => {
                Err(usage("raw input requires --rows and --cols"))
            }
            FileFormat::Text if self.rows.is_some() || self.cols.is_some() => {
                Err(usage("--rows/--cols only apply to raw input"))
            }
            _ => Ok(()),
        }
    }

    fn load(&self, path: &Path) -> CliResult<EmbeddingMatrix> {
        let file = File::open(path).map_err(io_err(path))?;
        let reader = BufReader::new(file);
        Ok(match self.format {
            FileFormat::Text => load_word2vec_text(reader)?,
            FileFormat::Raw => load_raw(reader, self.rows.unwrap(), self.cols.unwrap())?,
        })
    }
}

fn write_matrix(m: &EmbeddingMatrix, format: FileFormat, path: &Path) -> CliResult<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let writer = BufWriter::new(file);
    match format {
        FileFormat::Text => save_word2vec_text(m, writer)?,
        FileFormat::Raw => save_raw(m, writer)?,
    }
    Ok(())
}

fn read_vocab(path: &Path) -> CliResult<Vec<String>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(text
        .lines()
        .map(|l| l.trim_end_matches('\r').to_string())
        .filter(|l| !l.is_empty())
        .collect())
}

fn write_vocab(tokens: &[String], path: &Path) -> CliResult<()> {
    let mut s = String::with_capacity(tokens.iter().map(|t| t.len() + 1).sum());
    for t in tokens {
        s.push_str(t);
        s.push('\n');
    }
    fs::write(path, s).map_err(io_err(path))
}

fn emit(out: &mut dyn Write, text: &str) -> CliResult<()> {
    out.write_all(text.as_bytes())
        .map_err(io_err(Path::new("<stdout>")))
}

/// Runs one parsed command, writing its report to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Compress(a) => cmd_compress(&a, out),
        Command::Decompress(a) => cmd_decompress(&a, out),
        Command::Info(a) => cmd_info(&a, out),
        Command::Rwe(a) => cmd_rwe(&a, out),
        Command::Compare(a) => cmd_compare(&a, out),
        Command::Sweep(a) => cmd_sweep(&a, out),
    }
}

fn compress_params(
    kind: args::SchemeArg,
    groups: usize,
    clusters: usize,
    seed: u64,
    restarts: usize,
) -> CliResult<CompressParams> {
    if groups == 0 {
        return Err(usage("--groups must be at least 1"));
    }
    if clusters == 0 {
        return Err(usage("--clusters must be at least 1"));
    }
    if restarts == 0 {
        return Err(usage("--restarts must be at least 1"));
    }
    let scheme = PartitionScheme {
        kind: kind.into(),
        groups,
    };
    Ok(CompressParams::new(scheme, clusters, seed).restarts(restarts))
}

pub fn cmd_compress(a: &CompressArgs, out: &mut dyn Write) -> CliResult<()> {
    a.input_format.validate()?;
    let params = compress_params(a.scheme, a.groups, a.clusters, a.seed, a.restarts)?;
    let matrix = a.input_format.load(&a.input)?;
    if a.vocab_out.is_some() && matrix.vocab().is_none() {
        return Err(usage("--vocab-out needs an input with a vocabulary"));
    }

    let q = compress(&matrix, Method::from(a.method), &params)?.quantized;
    let bytes = codec::encode(&q);
    fs::write(&a.output, &bytes).map_err(io_err(&a.output))?;
    if let (Some(path), Some(tokens)) = (&a.vocab_out, matrix.vocab()) {
        write_vocab(tokens, path)?;
    }

    let report = CompressReport {
        command: "compress",
        header: HeaderSummary::from(&ContainerHeader::for_quantized(&q)),
        restarts: a.restarts,
        header_bytes: HEADER_LEN,
        file_bytes: bytes.len(),
        size: SizeSummary::from(&size_report(&q)),
    };
    emit(out, &render(&report, a.report))
}

pub fn cmd_decompress(a: &DecompressArgs, _out: &mut dyn Write) -> CliResult<()> {
    if a.format == FileFormat::Text && a.vocab.is_none() {
        return Err(usage("text output requires --vocab"));
    }
    let bytes = fs::read(&a.input).map_err(io_err(&a.input))?;
    let mut q = codec::decode(&bytes)?;
    if let Some(path) = &a.vocab {
        q = q.with_vocab(Some(read_vocab(path)?))?;
    }
    let seed = a.seed.unwrap_or(q.seed());
    let m = reconstruct(&q, ReconstructMode::from(a.mode), seed)?;
    write_matrix(&m, a.format, &a.output)
}

pub fn cmd_info(a: &InfoArgs, out: &mut dyn Write) -> CliResult<()> {
    let bytes = fs::read(&a.input).map_err(io_err(&a.input))?;
    let q = codec::decode(&bytes)?;
    let report = InfoReport {
        command: "info",
        header: HeaderSummary::from(&ContainerHeader::for_quantized(&q)),
        header_bytes: HEADER_LEN,
        file_bytes: bytes.len(),
        size: SizeSummary::from(&size_report(&q)),
    };
    emit(out, &render(&report, a.report))
}

pub fn cmd_rwe(a: &RweArgs, out: &mut dyn Write) -> CliResult<()> {
    if a.rows == 0 || a.cols == 0 {
        return Err(usage("--rows and --cols must be at least 1"));
    }
    if a.projection_dim == Some(0) {
        return Err(usage("--projection-dim must be at least 1"));
    }
    if a.format == FileFormat::Text && a.vocab.is_none() {
        return Err(usage("text output requires --vocab"));
    }
    let cfg = RweConfig {
        rows: a.rows,
        cols: a.cols,
        seed: a.seed,
        projection_dim: a.projection_dim,
    };
    let mut m = rwe_generate(&cfg)?;
    if let Some(path) = &a.vocab {
        m = m.with_vocab(Some(read_vocab(path)?))?;
    }
    write_matrix(&m, a.format, &a.output)?;
    if let (Some(w), Some(path)) = (projection_for(&cfg)?, &a.projection_out) {
        write_matrix(&w, FileFormat::Raw, path)?;
    }
    let report = RweReport {
        command: "rwe",
        rows: a.rows,
        cols: a.cols,
        seed: a.seed,
        projection_dim: a.projection_dim,
        size: SizeSummary::from(&rwe_size_report(&cfg)),
    };
    emit(out, &render(&report, a.report))
}

pub fn cmd_compare(a: &CompareArgs, out: &mut dyn Write) -> CliResult<()> {
    a.input_format.validate()?;
    if a.k == 0 {
        return Err(usage("--k must be at least 1"));
    }
    let original = a.input_format.load(&a.original)?;
    let other = a.input_format.load(&a.reconstructed)?;
    let f = fidelity(&original, &other, a.k)?;
    let report = CompareReport {
        command: "compare",
        rows: original.rows(),
        cols: original.cols(),
        fidelity: (&f).into(),
    };
    emit(out, &render(&report, a.report))
}

/// One sweep setting evaluated in memory: compress, mean reconstruction,
/// fidelity against the input.
pub fn evaluate_setting(
    matrix: &EmbeddingMatrix,
    method: Method,
    params: &CompressParams,
    k: usize,
) -> gpq_core::Result<(SizeReport, FidelityReport)> {
    let q = compress(matrix, method, params)?.quantized;
    let size = size_report(&q);
    let rebuilt = reconstruct(&q, ReconstructMode::Mean, q.seed())?;
    let f = fidelity(matrix, &rebuilt, k)?.with_size(size);
    Ok((size, f))
}

pub fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write) -> CliResult<()> {
    a.input_format.validate()?;
    if a.k == 0 {
        return Err(usage("--k must be at least 1"));
    }
    let settings: Vec<CompressParams> = a
        .configs
        .iter()
        .map(|&(g, c)| compress_params(a.scheme, g, c, a.seed, a.restarts))
        .collect::<CliResult<_>>()?;
    let matrix = a.input_format.load(&a.input)?;
    let method = Method::from(a.method);

    let run = |p: &CompressParams| -> CliResult<SweepEntry> {
        let (size, f) = evaluate_setting(&matrix, method, p, a.k)?;
        Ok(SweepEntry {
            groups: p.scheme.groups,
            clusters: p.clusters,
            size: SizeSummary::from(&size),
            fidelity: (&f).into(),
        })
    };
    let entries: Vec<SweepEntry> = if a.parallel {
        settings.par_iter().map(run).collect::<CliResult<_>>()?
    } else {
        settings.iter().map(run).collect::<CliResult<_>>()?
    };
    emit(out, &render(&entries, args::ReportFormat::Json))
}
