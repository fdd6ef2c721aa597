use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use osfs_core::evaluation::{run_study, similarity_evolution_at, StudyConfig};
use osfs_core::osfs::run_offline;
use osfs_core::ranking::rank;
use osfs_core::synth::{generate, TARGET_NAME};
use osfs_core::trace::{load_trace, preprocess, DEFAULT_VARIANCE_THRESHOLD};
use osfs_core::{DesignMatrix, Error, LoadPattern, OsfsConfig, RankMethod, SynthSpec};

/// Online feature selection for telemetry traces.
#[derive(Debug, Parser)]
#[command(name = "osfs", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rank every feature of a trace with one back-end.
    Rank(RankArgs),
    /// Run the online engine from one start time.
    Osfs(OsfsArgs),
    /// Run the multi-start study and write report.json, report.csv and similarity.csv.
    Study(StudyArgs),
    /// Generate a synthetic trace with planted informative features.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Arr,
    Ls,
    Tb,
}

impl From<Method> for RankMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Arr => RankMethod::Arr,
            Method::Ls => RankMethod::Ls,
            Method::Tb => RankMethod::Tb,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Pattern {
    Periodic,
    FlashCrowd,
}

#[derive(Debug, Args)]
struct TraceArgs {
    /// Trace CSV with a header row.
    #[arg(long)]
    input: PathBuf,
    /// Name of the target column, if the trace has one.
    #[arg(long)]
    target: Option<String>,
    #[arg(long, value_enum, default_value = "arr")]
    method: Method,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct RankArgs {
    #[command(flatten)]
    trace: TraceArgs,
    /// Keep only the top k features.
    #[arg(long)]
    k: Option<usize>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Debug, Args)]
struct OsfsArgs {
    #[command(flatten)]
    trace: TraceArgs,
    #[arg(long, default_value_t = 0.5)]
    eta: f64,
    /// 1-based row at which the stream starts.
    #[arg(long, default_value_t = 1)]
    start: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    /// `csv` writes the checkpoint log instead of the full result.
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Debug, Args)]
struct StudyArgs {
    #[command(flatten)]
    trace: TraceArgs,
    #[arg(long, default_value_t = 0.5)]
    eta: f64,
    #[arg(long, default_value_t = 10)]
    n_starts: usize,
    /// Directory for the report files; created if missing.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    n_features: usize,
    #[arg(long, default_value_t = 4096)]
    m_samples: usize,
    #[arg(long, default_value_t = 5)]
    n_informative: usize,
    #[arg(long, default_value_t = 10)]
    n_redundant: usize,
    #[arg(long, default_value_t = 0.05)]
    noise_sigma: f64,
    #[arg(long, value_enum, default_value = "periodic")]
    pattern: Pattern,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

const SIMILARITY_K: [usize; 4] = [4, 16, 64, 256];

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Rank(args) => cmd_rank(args),
        Command::Osfs(args) => cmd_osfs(args),
        Command::Study(args) => cmd_study(args),
        Command::Synth(args) => cmd_synth(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_)
        | Error::Json(_)
        | Error::DimensionMismatch { .. }
        | Error::SizeMismatch { .. }
        | Error::EmptySet
        | Error::FedAfterDone
        | Error::OutOfOrderSample { .. }
        | Error::LengthMismatch { .. } => 1,
        _ => 2,
    }
}

fn load(args: &TraceArgs) -> Result<DesignMatrix, Error> {
    let raw = load_trace(&args.input, args.target.as_deref())?;
    let (matrix, _) = preprocess(&raw, DEFAULT_VARIANCE_THRESHOLD)?;
    Ok(matrix)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json(out: &mut dyn Write, value: serde_json::Value) -> Result<(), Error> {
    serde_json::to_writer_pretty(&mut *out, &value)?;
    writeln!(out)?;
    Ok(())
}

fn cmd_rank(args: RankArgs) -> Result<(), Error> {
    let method = RankMethod::from(args.trace.method);
    let matrix = load(&args.trace)?;
    let mut list = rank(&matrix, method, args.trace.seed)?;
    if let Some(k) = args.k {
        if k == 0 || k > list.len() {
            return Err(Error::OutOfRange {
                what: "k",
                value: k,
                min: 1,
                max: list.len(),
            });
        }
        list.truncate(k);
    }
    let mut out = output(args.out.as_deref())?;
    match args.format {
        Format::Csv => list.write_csv(&mut out)?,
        Format::Json => write_json(
            &mut out,
            serde_json::json!({ "seed": args.trace.seed, "ranking": list }),
        )?,
    }
    out.flush()?;
    Ok(())
}

fn cmd_osfs(args: OsfsArgs) -> Result<(), Error> {
    let config = OsfsConfig::new(args.trace.method.into())
        .with_eta(args.eta)
        .with_seed(args.trace.seed);
    let matrix = load(&args.trace)?;
    let result = run_offline(&matrix, &config, args.start)?;
    let mut out = output(args.out.as_deref())?;
    match args.format {
        Format::Json => write_json(&mut out, serde_json::to_value(&result)?)?,
        Format::Csv => {
            writeln!(out, "k,t,sim")?;
            for c in &result.checkpoints {
                writeln!(out, "{},{},{}", c.k, c.t, c.sim)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_study(args: StudyArgs) -> Result<(), Error> {
    let method = RankMethod::from(args.trace.method);
    let config = StudyConfig {
        n_starts: args.n_starts,
        eta: args.eta,
        ..StudyConfig::new(method, args.trace.seed)
    };
    let matrix = load(&args.trace)?;
    let report = run_study(&matrix, &config)?;

    let osfs = config.osfs_config();
    let k_list: Vec<usize> = SIMILARITY_K
        .into_iter()
        .filter(|&k| k <= matrix.n_features())
        .collect();
    let similarity = if k_list.is_empty() {
        None
    } else {
        Some(similarity_evolution_at(
            &matrix,
            method,
            &k_list,
            &osfs.checkpoint_grid,
            &report.starts(),
            args.trace.seed,
        )?)
    };

    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("report.json"), report.to_json()? + "\n")?;
    let mut csv = BufWriter::new(File::create(args.out.join("report.csv"))?);
    report.write_csv(&mut csv)?;
    csv.flush()?;
    let mut sim = BufWriter::new(File::create(args.out.join("similarity.csv"))?);
    match similarity {
        Some(table) => table.write_csv(&mut sim)?,
        None => writeln!(sim, "k,t,mean_sim")?,
    }
    sim.flush()?;
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), Error> {
    let spec = SynthSpec {
        n_features: args.n_features,
        m_samples: args.m_samples,
        n_informative: args.n_informative,
        n_redundant: args.n_redundant,
        noise_sigma: args.noise_sigma,
        load_pattern: match args.pattern {
            Pattern::Periodic => LoadPattern::periodic(),
            Pattern::FlashCrowd => LoadPattern::flash_crowd(),
        },
        seed: args.seed,
    };
    let matrix = generate(&spec)?;
    let mut out = output(args.out.as_deref())?;
    matrix.write_csv(&mut out, TARGET_NAME)?;
    out.flush()?;
    Ok(())
}
