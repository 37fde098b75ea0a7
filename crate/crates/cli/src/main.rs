//! Command-line driver: generate data and streams, run benchmarks, compare
//! results. Log verbosity is read from `DYNKMEANS_LOG` (e.g. `info`, `debug`).

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tracing::{debug, info};

use dynkmeans::harness::{
    compare, load_dataset, run_on, write_dataset, write_rows_csv, Algorithm, DataSource, RunConfig, RunSummary,
};
use dynkmeans::streams::{gen_birch_like, generate, write_stream, BirchParams, StreamKind, StreamSpec};

const LOG_ENV: &str = "DYNKMEANS_LOG";

#[derive(Parser)]
#[command(name = "dynkmeans", version, about = "Dynamic k-means coresets: data generation, benchmarks, comparisons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a Birch-like synthetic dataset and optionally an update stream.
    Generate(GenerateArgs),
    /// Replay a stream into one algorithm and report timings and metrics.
    Run(RunArgs),
    /// Join several JSON run summaries into a speedup table.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum StreamArg {
    Insert,
    Sliding,
    Random,
    Snake,
    /// Snake window of 20000 capped at 80000 events.
    BirchSnake,
}

#[derive(Args)]
struct StreamArgs {
    /// Update sequence shape.
    #[arg(long, value_enum, default_value = "insert")]
    stream: StreamArg,
    /// Window size for sliding and snake streams.
    #[arg(long)]
    window: Option<usize>,
    /// Insertion probability for random windows.
    #[arg(long, default_value_t = 0.5)]
    pi: f64,
    /// Snake window turns back to growing below this fraction of the window.
    #[arg(long, default_value_t = 0.2)]
    low_frac: f64,
}

impl StreamArgs {
    fn kind(&self) -> Result<StreamKind> {
        let window = || self.window.with_context(|| format!("--window is required for --stream {:?}", self.stream));
        Ok(match self.stream {
            StreamArg::Insert => StreamKind::InsertOnly,
            StreamArg::Sliding => StreamKind::SlidingWindow { t: window()? },
            StreamArg::Random => StreamKind::RandomWindow { pi: self.pi },
            StreamArg::Snake => StreamKind::snake(window()?, self.low_frac),
            StreamArg::BirchSnake => StreamKind::birch_snake(),
        })
    }
}

#[derive(Args)]
struct SyntheticArgs {
    /// Number of synthetic points (used when no --input is given).
    #[arg(long, default_value_t = 20_000)]
    synthetic: usize,
    #[arg(long, default_value_t = 100)]
    clusters: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    data: SyntheticArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dataset CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write an update stream (`I,<id>,<w>,<coords..>` / `D,<id>`) here.
    #[arg(long)]
    stream_out: Option<PathBuf>,
    #[command(flatten)]
    stream: StreamArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value = "optimized-dynamic")]
    algo: Algorithm,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Coreset size; defaults to 5k.
    #[arg(long)]
    s: Option<usize>,
    /// Deletion cut-off; defaults to 2s/t for sliding windows, 0.03 otherwise.
    #[arg(long)]
    delta: Option<f64>,
    /// Height of the shallow tree.
    #[arg(long, default_value_t = 1)]
    height: usize,
    #[command(flatten)]
    stream: StreamArgs,
    /// CSV dataset; a synthetic Birch-like dataset is used when absent.
    #[arg(long, conflicts_with = "synthetic")]
    input: Option<PathBuf>,
    #[command(flatten)]
    data: SyntheticArgs,
    /// Drop exact duplicate coordinate rows from the input.
    #[arg(long)]
    dedupe: bool,
    /// Shuffle the input deterministically.
    #[arg(long)]
    shuffle: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    measure_start: usize,
    /// Number of timed operations; all remaining when absent.
    #[arg(long)]
    measure_count: Option<usize>,
    /// Metric checkpoint cadence in operations; 0 disables.
    #[arg(long, default_value_t = 100)]
    checkpoint_every: usize,
    /// Operations averaged per timing row.
    #[arg(long, default_value_t = 20)]
    bucket: usize,
    /// Column name used by `compare`.
    #[arg(long)]
    label: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct CompareArgs {
    /// JSON summaries written by `run --format json`.
    #[arg(required = true)]
    summaries: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn generate_cmd(args: GenerateArgs) -> Result<()> {
    let params = BirchParams::new(args.data.synthetic, args.data.clusters, args.data.dim, args.seed);
    let data = gen_birch_like(&params)?.points;
    info!(points = data.len(), "generated dataset");
    let mut out = open_out(args.out.as_deref())?;
    write_dataset(&mut out, &data)?;
    out.flush()?;
    if let Some(path) = args.stream_out {
        let spec = StreamSpec { kind: args.stream.kind()?, rng_seed: args.seed };
        let mut w = open_out(Some(&path))?;
        write_stream(&mut w, generate(&data, &spec)?)?;
        w.flush()?;
        info!(path = %path.display(), "wrote stream");
    }
    Ok(())
}

fn run_cmd(args: RunArgs) -> Result<()> {
    let source = match args.input {
        Some(path) => DataSource::Csv { path },
        None => DataSource::Synthetic(BirchParams::new(args.data.synthetic, args.data.clusters, args.data.dim, args.seed)),
    };
    let cfg = RunConfig {
        s: args.s.unwrap_or(5 * args.k),
        delta: args.delta,
        height: args.height,
        stream: args.stream.kind()?,
        source,
        dedupe: args.dedupe,
        shuffle: args.shuffle,
        measure_start: args.measure_start,
        measure_count: args.measure_count,
        checkpoint_every: args.checkpoint_every,
        bucket: args.bucket,
        repeats: args.repeats,
        rng_seed: args.seed,
        label: args.label,
        ..RunConfig::new(args.algo, args.k)
    };
    cfg.validate()?;
    debug!(?cfg, "run config");
    let data = load_dataset(&cfg)?;
    if data.is_empty() {
        bail!("dataset is empty");
    }
    info!(algorithm = %cfg.algorithm, points = data.len(), repeats = cfg.repeats, "starting run");
    let summary = run_on(&cfg, &data)?;
    info!(
        mean_op_us = summary.aggregate.mean_op_ns / 1e3,
        quality = summary.aggregate.mean_quality,
        distortion = summary.aggregate.mean_distortion,
        "finished"
    );
    let mut out = open_out(args.out.as_deref())?;
    match args.format {
        Format::Json => summary.write_json(&mut out)?,
        Format::Csv => write_rows_csv(&mut out, &summary.rows())?,
        Format::Text => write_text(&mut out, &summary)?,
    }
    out.flush()?;
    Ok(())
}

fn write_text(out: &mut dyn Write, s: &RunSummary) -> Result<()> {
    let a = &s.aggregate;
    writeln!(out, "{} on {}", s.config.algorithm, s.label)?;
    writeln!(out, "  repeats         {}", s.runs.len())?;
    writeln!(out, "  mean op time    {:.1} us (median {:.1} us)", a.mean_op_ns / 1e3, a.median_op_ns / 1e3)?;
    writeln!(out, "  quality         {:.4} (median {:.4})", a.mean_quality, a.median_quality)?;
    writeln!(out, "  distortion      {:.4} (median {:.4})", a.mean_distortion, a.median_distortion)?;
    Ok(())
}

fn compare_cmd(args: CompareArgs) -> Result<()> {
    let summaries = args
        .summaries
        .iter()
        .map(|p| RunSummary::load(p).with_context(|| format!("cannot read summary {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let table = compare(&summaries);
    let mut out = open_out(args.out.as_deref())?;
    match args.format {
        Format::Text => out.write_all(table.render_text().as_bytes())?,
        Format::Csv => table.write_csv(&mut out)?,
        Format::Json => serde_json::to_writer_pretty(&mut out, &table)?,
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_env(LOG_ENV).unwrap_or_else(|_| "warn".into()))
        .with_writer(io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate_cmd(a),
        Command::Run(a) => run_cmd(a),
        Command::Compare(a) => compare_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
