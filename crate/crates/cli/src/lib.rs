//! Command-line entry point for the btcxr toolkit.
//!
//! Every subcommand reads its inputs, runs on a rayon pool sized by
//! `--threads` and writes its output atomically to `--out`, or to standard
//! output when `--out` is absent. Exit codes: 0 on success, 1 on a domain
//! error, 2 on a usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use btcxr_core::Error;

mod commands;
pub mod report;

pub use report::format_metric_cell;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "btcxr", version, about = "Chest X-ray data preparation, evaluation and representation-learning toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Seed for the subcommand's random stream. Defaults: split 42,
    /// eval-det/eval-cls 7, bt-train 1, linear-eval 3.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads; outputs do not depend on this value.
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: Option<u32>,

    /// Overridden by the BTCXR_LOG environment variable.
    #[arg(long, global = true, default_value = "warn", value_parser = ["off", "error", "warn", "info", "debug", "trace"])]
    pub log_level: String,

    /// Report errors as JSON objects {code, message, context} on stderr.
    #[arg(long, global = true)]
    pub json_errors: bool,

    /// Output path; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a source CSV into a manifest.
    #[command(subcommand)]
    Ingest(IngestSource),
    /// Fuse duplicate rater boxes with weighted box fusion.
    Fuse(FuseArgs),
    /// Multi-label stratified split into named folds.
    Split(SplitArgs),
    /// mAP and per-class AP with bootstrap intervals.
    EvalDet(EvalDetArgs),
    /// Macro and per-label ROC-AUC with bootstrap intervals.
    EvalCls(EvalClsArgs),
    /// Train the toy redundancy-reduction encoder.
    BtTrain(BtTrainArgs),
    /// Linear probe at several training fractions.
    LinearEval(LinearEvalArgs),
    /// Render one or more reports as a table.
    Report(ReportArgs),
}

#[derive(Debug, Subcommand)]
pub enum IngestSource {
    /// Instance-level box annotations.
    Vindr {
        #[arg(long)]
        csv: PathBuf,
        /// image_id,width,height table.
        #[arg(long)]
        dims: PathBuf,
    },
    /// Image-level finding labels.
    Nih {
        #[arg(long)]
        csv: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.4)]
    pub iou_thr: f64,
    /// mean | mean_scaled_by_rater_count
    #[arg(long, default_value = "mean")]
    pub score_mode: String,
    /// Rater weight as ID=W; repeatable.
    #[arg(long = "rater-weight", value_parser = parse_rater_weight)]
    pub rater_weights: Vec<(String, f64)>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0.8,0.1,0.1")]
    pub fractions: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "train,val,test")]
    pub names: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Continuous,
    Points101,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EmptyClassArg {
    Exclude,
    Zero,
}

#[derive(Debug, Args)]
pub struct EvalDetArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub iou_thr: f64,
    #[arg(long, value_enum, default_value = "continuous")]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value = "exclude")]
    pub empty_class: EmptyClassArg,
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
}

#[derive(Debug, Args)]
pub struct EvalClsArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
}

#[derive(Debug, Args)]
pub struct BtTrainArgs {
    /// Sample file: u64 LE header N, H, W then N*H*W f64 LE values.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "16,8")]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 5e-3)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.6)]
    pub crop_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub crop_max: f64,
    #[arg(long, default_value_t = 0.5)]
    pub flip_prob: f64,
    #[arg(long, default_value_t = 0.1)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 0.1)]
    pub brightness: f64,
    #[arg(long, default_value_t = 0.1)]
    pub contrast: f64,
    /// Per-epoch loss CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LinearEvalArgs {
    /// Training features (BTFX).
    #[arg(long)]
    pub features: PathBuf,
    /// Test features (BTFX).
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.1,1.0")]
    pub fractions: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub l2: f64,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// eval-det, eval-cls or linear-eval JSON; repeatable, one column each.
    #[arg(long = "in", required = true)]
    pub inputs: Vec<PathBuf>,
    /// Column titles, comma separated; default is each file's stem.
    #[arg(long, value_delimiter = ',')]
    pub names: Vec<String>,
}

fn parse_rater_weight(s: &str) -> Result<(String, f64), String> {
    let (id, w) = s.split_once('=').ok_or_else(|| format!("expected ID=W, got '{s}'"))?;
    let w: f64 = w.parse().map_err(|_| format!("cannot parse weight '{w}'"))?;
    if id.is_empty() {
        return Err("empty rater id".into());
    }
    Ok((id.to_string(), w))
}

fn init_logging(level: &str) {
    let filter = std::env::var("BTCXR_LOG").unwrap_or_else(|_| level.to_string());
    // a second initialisation in the same process keeps the first logger
    let _ = env_logger::Builder::new()
        .parse_filters(&filter)
        .target(env_logger::Target::Stderr)
        .try_init();
}

fn error_context(e: &Error) -> serde_json::Map<String, serde_json::Value> {
    let mut ctx = serde_json::Map::new();
    match e {
        Error::MissingDimension { image_id }
        | Error::DuplicateImage { image_id }
        | Error::UnknownImage { image_id }
        | Error::MissingPrediction { image_id } => {
            ctx.insert("image_id".into(), image_id.clone().into());
        }
        Error::MalformedRow { row, .. } => {
            ctx.insert("row".into(), (*row).into());
        }
        Error::Io { path, .. } => {
            ctx.insert("path".into(), path.display().to_string().into());
        }
        Error::DivergenceDetected { epoch } => {
            ctx.insert("epoch".into(), (*epoch).into());
        }
        _ => {}
    }
    ctx
}

fn report_error(json: bool, code: &str, message: &str, context: serde_json::Map<String, serde_json::Value>) {
    let mut err = std::io::stderr().lock();
    if json {
        let obj = serde_json::json!({ "code": code, "message": message, "context": context });
        let _ = writeln!(err, "{obj}");
    } else {
        let _ = writeln!(err, "error: {message}");
    }
}

/// Parse `argv` (program name first) and run the subcommand.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let json_errors = argv.iter().any(|a| a == "--json-errors");
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return EXIT_OK;
            }
            if json_errors {
                let msg = e.render().to_string();
                report_error(true, "UsageError", msg.trim_end(), serde_json::Map::new());
            } else {
                let _ = e.print();
            }
            return EXIT_USAGE;
        }
    };
    init_logging(&cli.log_level);

    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0) as usize)
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            report_error(cli.json_errors, "ThreadPool", &e.to_string(), serde_json::Map::new());
            return EXIT_DOMAIN;
        }
    };
    match pool.install(|| commands::dispatch(&cli)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            report_error(cli.json_errors, e.code(), &e.to_string(), error_context(&e));
            EXIT_DOMAIN
        }
    }
}
