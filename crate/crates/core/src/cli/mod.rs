//! The `cave` command line.

mod evaluate;
mod generate;
mod score;

pub use score::CreditRecord;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::bench::BenchError;
use crate::config::{ConfigError, RunConfig};
use crate::credit::CreditError;
use crate::dataset::DatasetError;
use crate::reward::RewardError;
use crate::scoring::ScoringError;
use crate::stats::StatsError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_REMOTE: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "cave",
    version,
    about = "Process-credit scoring, advantages, benchmark generation and evaluation statistics"
)]
pub struct Cli {
    /// Base directory for every relative path argument.
    #[arg(long, global = true, default_value = ".", env = "CAVE_ROOT")]
    pub root: PathBuf,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// TOML run configuration. `CAVE_<SECTION>_<KEY>` variables override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a benchmark split: images, data.jsonl and manifest.json.
    Generate(GenerateArgs),
    /// Check a training split and a benchmark split for shared seeds,
    /// layouts, source regions and records.
    VerifySplit(VerifyArgs),
    /// Compute per-step credits and trajectory rewards.
    Score(ScoreArgs),
    /// Group rewards by prompt and compute group-relative advantages.
    Advantage(AdvantageArgs),
    /// Grade predictions against a benchmark split.
    Eval(EvalArgs),
    /// Accuracy, intervals, stratified and credit-quantile tables, paired tests.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// vjump, lt, match, rs, tvjump, or `core` for the four benchmark families.
    #[arg(long)]
    pub scenario: String,
    /// Samples per scenario.
    #[arg(long)]
    pub count: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// First seed; sample i uses seed_base + i. Defaults to generate.seed_base.
    #[arg(long)]
    pub seed_base: Option<u64>,
    /// Per-stratum counts for easy,medium,hard (must sum to --count).
    #[arg(long, value_delimiter = ',')]
    pub quotas: Option<Vec<usize>>,
    /// Use a single preset level (0, 1 or 2) instead of three strata.
    #[arg(long, conflicts_with_all = ["quotas", "profile"])]
    pub level: Option<usize>,
    /// JSON difficulty profile used for every sample instead of strata.
    #[arg(long, conflicts_with = "quotas")]
    pub profile: Option<PathBuf>,
    /// Split name recorded in the manifest.
    #[arg(long, default_value = "bench")]
    pub split: String,
    /// Remote-sensing source image directory. Defaults to generate.sources.
    #[arg(long)]
    pub sources: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub bench: PathBuf,
    /// Also write the report as JSON here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Trajectory documents, one JSON object per line.
    #[arg(long)]
    pub trajectories: PathBuf,
    /// `mock:<table.json>` or `remote:[<url>]` (empty URL uses scorer.endpoint).
    #[arg(long)]
    pub scorer: String,
    /// Benchmark data.jsonl (or its directory) supplying perception text by
    /// sample id. Without it, trajectories have no evidence units.
    #[arg(long)]
    pub evidence: Option<PathBuf>,
    /// Output credits JSONL.
    #[arg(long, required_unless_present = "dry_run")]
    pub out: Option<PathBuf>,
    /// Validate inputs and scorer selection without scoring or writing.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Args)]
pub struct AdvantageArgs {
    /// Credits JSONL written by `score`.
    #[arg(long)]
    pub credits: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Benchmark split directory.
    #[arg(long)]
    pub data: PathBuf,
    /// JSONL of {sample_id, prediction, credit?}.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Output results JSONL.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Results JSONL of {sample_id, prediction, correct, credit?, difficulty}.
    #[arg(long)]
    pub results: PathBuf,
    /// Second system's results for paired comparison (A = --results).
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// Difficulty factor to stratify on (repeatable).
    #[arg(long)]
    pub factor: Vec<String>,
    /// Bin edges for each --factor, e.g. `2,4,6,25` (repeatable, same order).
    #[arg(long)]
    pub edges: Vec<String>,
    /// Credit quantile groups. Defaults to stats.credit_quantiles.
    #[arg(long)]
    pub quantiles: Option<usize>,
    /// Output directory for report.json and CSV tables.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Remote(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Io(_) => EXIT_IO,
            CliError::Remote(_) => EXIT_REMOTE,
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Io { .. } => CliError::Io(e.to_string()),
            DatasetError::Bench(b) => b.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<ScoringError> for CliError {
    fn from(e: ScoringError) -> Self {
        match e {
            ScoringError::Unavailable(_) | ScoringError::Rejected { .. } => CliError::Remote(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<CreditError> for CliError {
    fn from(e: CreditError) -> Self {
        match e {
            CreditError::Scoring(tf) => match tf.source {
                ScoringError::Unavailable(_) | ScoringError::Rejected { .. } => CliError::Remote(tf.to_string()),
                _ => CliError::Validation(tf.to_string()),
            },
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<RewardError> for CliError {
    fn from(e: RewardError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        CliError::Validation(e.to_string())
    }
}

pub(crate) fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Resolved global options shared by the subcommands.
pub struct Context {
    pub root: PathBuf,
    pub config: RunConfig,
}

impl Context {
    pub fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }
}

/// Runs a parsed command line, writing human-readable output to `out`.
pub fn run(cli: Cli, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let config_path = cli.config.as_ref().map(|p| if p.is_absolute() { p.clone() } else { cli.root.join(p) });
    let config = RunConfig::load(config_path.as_deref())?;
    let ctx = Context { root: cli.root, config };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| CliError::Validation(format!("--jobs: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Generate(a) => generate::generate(&ctx, a, out),
        Command::VerifySplit(a) => generate::verify_split(&ctx, a, out),
        Command::Score(a) => score::score(&ctx, a, out),
        Command::Advantage(a) => score::advantage(&ctx, a, out),
        Command::Eval(a) => evaluate::eval(&ctx, a, out),
        Command::Stats(a) => evaluate::stats(&ctx, a, out),
    })
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let mut buf = Vec::new();
    let result = run(cli, &mut buf);
    let _ = std::io::stdout().write_all(&buf);
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub(crate) fn print_json(out: &mut (dyn Write + Send), value: &impl serde::Serialize) -> Result<(), CliError> {
    let s = serde_json::to_string_pretty(value).expect("serializable");
    writeln!(out, "{s}").map_err(|e| CliError::Io(format!("stdout: {e}")))
}
