use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use serde::Serialize;

use btcxr_core::barlow::{bt_train_toy, AugmentationSpec, CrossCorrelation, Encoder, SampleSet, TrainConfig};
use btcxr_core::fsutil::{read_to_string, write_atomic};
use btcxr_core::ingest::{load_manifest, parse_nih_csv, parse_vindr_csv, read_dims_csv};
use btcxr_core::lineval::{evaluate_protocol, load_btfx, LinearConfig};
use btcxr_core::metrics::detection::parse_detections_jsonl;
use btcxr_core::metrics::classification::parse_scores_jsonl;
use btcxr_core::metrics::{evaluate_classification, evaluate_detection, ApMode, ClsEvalConfig, DetEvalConfig, EmptyClassPolicy};
use btcxr_core::stratify::{stratified_split, SplitSpec};
use btcxr_core::wbf::{fuse_manifest, FusionConfig, ScoreMode};
use btcxr_core::{DatasetManifest, Error, Result};

use crate::report::{column_name, render_table, LoadedReport};
use crate::{
    BtTrainArgs, Cli, Command, EmptyClassArg, EvalClsArgs, EvalDetArgs, FuseArgs, IngestSource, LinearEvalArgs,
    ModeArg, ReportArgs, SplitArgs,
};

const DEFAULT_SPLIT_SEED: u64 = 42;
const DEFAULT_EVAL_SEED: u64 = 7;
const DEFAULT_BT_SEED: u64 = 1;
const DEFAULT_LINEVAL_SEED: u64 = 3;

fn not_found(path: &Path, what: &str) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::new(std::io::ErrorKind::NotFound, format!("{what} does not exist")),
    }
}

/// Fail before any work if an input is missing or an output directory does
/// not exist.
fn check_paths(inputs: &[&Path], outputs: &[Option<&Path>]) -> Result<()> {
    for p in inputs {
        if !p.is_file() {
            return Err(not_found(p, "input file"));
        }
    }
    for p in outputs.iter().flatten() {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            if !dir.is_dir() {
                return Err(not_found(dir, "output directory"));
            }
        }
    }
    Ok(())
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => {
            write_atomic(p, bytes)?;
            log::info!("wrote {}", p.display());
            Ok(())
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::Io {
                    path: "<stdout>".into(),
                    source: e,
                })
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub(crate) fn dispatch(cli: &Cli) -> Result<()> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Ingest(src) => ingest(src, out),
        Command::Fuse(a) => fuse(a, out),
        Command::Split(a) => split(a, cli.seed.unwrap_or(DEFAULT_SPLIT_SEED), out),
        Command::EvalDet(a) => eval_det(a, cli.seed.unwrap_or(DEFAULT_EVAL_SEED), out),
        Command::EvalCls(a) => eval_cls(a, cli.seed.unwrap_or(DEFAULT_EVAL_SEED), out),
        Command::BtTrain(a) => bt_train(a, cli.seed.unwrap_or(DEFAULT_BT_SEED), out),
        Command::LinearEval(a) => linear_eval(a, cli.seed.unwrap_or(DEFAULT_LINEVAL_SEED), out),
        Command::Report(a) => report(a, out),
    }
}

fn ingest(src: &IngestSource, out: Option<&Path>) -> Result<()> {
    let mut m: DatasetManifest = match src {
        IngestSource::Vindr { csv, dims } => {
            check_paths(&[csv, dims], &[out])?;
            let dims_map = read_dims_csv(open(dims)?)?;
            let mut m = parse_vindr_csv(open(csv)?, &dims_map)?;
            m.provenance.set("source_file", file_name(csv));
            m.provenance.set("dims_file", file_name(dims));
            m
        }
        IngestSource::Nih { csv } => {
            check_paths(&[csv], &[out])?;
            let mut m = parse_nih_csv(open(csv)?)?;
            m.provenance.set("source_file", file_name(csv));
            m
        }
    };
    m.provenance.set("tool_version", env!("CARGO_PKG_VERSION"));
    log::info!("ingested {} images, {} boxes, {} labels", m.len(), m.box_count(), m.label_names.len());
    emit(out, m.to_json()?.as_bytes())
}

fn fuse(a: &FuseArgs, out: Option<&Path>) -> Result<()> {
    check_paths(&[&a.input], &[out])?;
    let mode: ScoreMode = a.score_mode.parse()?;
    let weights: BTreeMap<String, f64> = a.rater_weights.iter().cloned().collect();
    let cfg = FusionConfig::new(a.iou_thr, weights, mode)?;
    let m = load_manifest(&a.input)?;
    let fused = fuse_manifest(&m, &cfg)?;
    log::info!("fused {} boxes into {}", m.box_count(), fused.box_count());
    emit(out, fused.to_json()?.as_bytes())
}

fn split(a: &SplitArgs, seed: u64, out: Option<&Path>) -> Result<()> {
    check_paths(&[&a.input], &[out])?;
    let spec = SplitSpec::new(a.names.clone(), a.fractions.clone(), seed)?;
    let m = load_manifest(&a.input)?;
    let s = stratified_split(&m, &spec)?;
    for name in spec.fold_names() {
        log::info!("fold {name}: {} images", s.fold(name).len());
    }
    emit(out, s.to_json()?.as_bytes())
}

fn eval_det(a: &EvalDetArgs, seed: u64, out: Option<&Path>) -> Result<()> {
    check_paths(&[&a.gt, &a.pred], &[out])?;
    let cfg = DetEvalConfig {
        iou_threshold: a.iou_thr,
        mode: match a.mode {
            ModeArg::Continuous => ApMode::Continuous,
            ModeArg::Points101 => ApMode::Points101,
        },
        empty_class: match a.empty_class {
            EmptyClassArg::Exclude => EmptyClassPolicy::Exclude,
            EmptyClassArg::Zero => EmptyClassPolicy::Zero,
        },
        resamples: a.bootstrap,
        seed,
    };
    if !(cfg.iou_threshold > 0.0 && cfg.iou_threshold <= 1.0) {
        return Err(Error::InvalidArgument(format!("iou threshold {} outside (0, 1]", cfg.iou_threshold)));
    }
    let gt = load_manifest(&a.gt)?;
    let dets = parse_detections_jsonl(&read_to_string(&a.pred)?)?;
    let r = evaluate_detection(&gt, &dets, &cfg)?;
    if r.skipped_resamples > 0 {
        log::warn!("{} of {} resamples had no ground truth", r.skipped_resamples, cfg.resamples);
    }
    emit(out, r.to_json()?.as_bytes())
}

fn eval_cls(a: &EvalClsArgs, seed: u64, out: Option<&Path>) -> Result<()> {
    check_paths(&[&a.gt, &a.pred], &[out])?;
    let cfg = ClsEvalConfig {
        resamples: a.bootstrap,
        seed,
    };
    let gt = load_manifest(&a.gt)?;
    let preds = parse_scores_jsonl(&read_to_string(&a.pred)?)?;
    let r = evaluate_classification(&gt, &preds, &cfg)?;
    if !r.undefined_classes.is_empty() {
        log::warn!("labels without both classes: {}", r.undefined_classes.join(", "));
    }
    emit(out, r.to_json()?.as_bytes())
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    config: &'a TrainConfig,
    n_samples: usize,
    epochs_run: usize,
    mean_abs_diag_error: f64,
    mean_abs_offdiag: f64,
    final_correlation: &'a CrossCorrelation,
    encoder: &'a Encoder,
}

fn bt_train(a: &BtTrainArgs, seed: u64, out: Option<&Path>) -> Result<()> {
    check_paths(&[&a.data], &[out, a.trace.as_deref()])?;
    let augment = AugmentationSpec {
        crop_scale_range: (a.crop_min, a.crop_max),
        flip_probability: a.flip_prob,
        noise_sigma: a.noise_sigma,
        brightness_jitter: a.brightness,
        contrast_jitter: a.contrast,
        seed,
    };
    augment.validate()?;
    let cfg = TrainConfig {
        dims: a.dims.clone(),
        lambda: a.lambda,
        lr: a.lr,
        epochs: a.epochs,
        seed,
        eps: a.eps,
        augment,
    };
    let data = SampleSet::load(&a.data)?;
    let trace = bt_train_toy(&data, &cfg)?;
    let cc = &trace.final_cc;
    log::info!(
        "final mean |C_ii - 1| = {:.4}, mean |C_ij| = {:.4}",
        cc.mean_abs_diag_error(),
        cc.mean_abs_offdiag()
    );
    if let Some(p) = &a.trace {
        write_atomic(p, trace.to_csv().as_bytes())?;
    }
    if out.is_some() || a.trace.is_none() {
        let summary = TrainSummary {
            config: &cfg,
            n_samples: data.n,
            epochs_run: trace.epochs.len(),
            mean_abs_diag_error: cc.mean_abs_diag_error(),
            mean_abs_offdiag: cc.mean_abs_offdiag(),
            final_correlation: cc,
            encoder: &trace.encoder,
        };
        let mut s = serde_json::to_string_pretty(&summary)?;
        s.push('\n');
        emit(out, s.as_bytes())?;
    }
    Ok(())
}

fn linear_eval(a: &LinearEvalArgs, seed: u64, out: Option<&Path>) -> Result<()> {
    check_paths(&[&a.features, &a.test], &[out])?;
    let cfg = LinearConfig {
        lr: a.lr,
        epochs: a.epochs,
        l2: a.l2,
        seed,
    };
    let train = load_btfx(&a.features)?;
    let test = load_btfx(&a.test)?;
    let r = evaluate_protocol(&train, &test, &a.fractions, a.repeats, &cfg, seed)?;
    for s in &r.summary {
        log::info!("fraction {}: mean macro AUC {:.4}", s.fraction, s.macro_auc.mean);
    }
    emit(out, r.to_json()?.as_bytes())
}

fn report(a: &ReportArgs, out: Option<&Path>) -> Result<()> {
    let inputs: Vec<&Path> = a.inputs.iter().map(|p| p.as_path()).collect();
    check_paths(&inputs, &[out])?;
    if !a.names.is_empty() && a.names.len() != a.inputs.len() {
        return Err(Error::InvalidArgument(format!(
            "{} column names for {} inputs",
            a.names.len(),
            a.inputs.len()
        )));
    }
    let columns: Vec<String> = if a.names.is_empty() {
        inputs.iter().map(|p| column_name(p)).collect()
    } else {
        a.names.clone()
    };
    let reports = inputs
        .iter()
        .map(|p| LoadedReport::parse(&read_to_string(p)?))
        .collect::<Result<Vec<_>>>()?;
    emit(out, render_table(&reports, &columns)?.as_bytes())
}
