use serde::{Deserialize, Serialize};

use super::bootstrap::{bootstrap_replicates, percentile_interval};
use super::classification::{macro_mean, ClassificationScene, ScoreLine};
use super::detection::{mean_ap_from, ApMode, Detection, DetectionScene, EmptyClassPolicy};
use crate::error::{Error, Result};
use crate::ingest::DatasetManifest;

pub const CONFIDENCE_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub iou_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub interpolation: Option<ApMode>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub empty_class: Option<EmptyClassPolicy>,
    pub bootstrap_resamples: usize,
    pub seed: u64,
    pub confidence_level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetric {
    pub class_id: u32,
    pub name: String,
    pub value: f64,
    pub ci: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metric_name: String,
    pub overall: f64,
    pub overall_ci: [f64; 2],
    pub per_class: Vec<ClassMetric>,
    /// Classes without ground truth (detection) or without both label
    /// values (classification) on the full set.
    pub undefined_classes: Vec<String>,
    pub n_images: usize,
    pub skipped_resamples: usize,
    pub config: ConfigEcho,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetEvalConfig {
    pub iou_threshold: f64,
    pub mode: ApMode,
    pub empty_class: EmptyClassPolicy,
    pub resamples: usize,
    pub seed: u64,
}

impl Default for DetEvalConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            mode: ApMode::Continuous,
            empty_class: EmptyClassPolicy::Exclude,
            resamples: 1000,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClsEvalConfig {
    pub resamples: usize,
    pub seed: u64,
}

impl Default for ClsEvalConfig {
    fn default() -> Self {
        Self { resamples: 1000, seed: 7 }
    }
}

fn class_name(m: &DatasetManifest, k: usize) -> String {
    m.label_names.get(k).cloned().unwrap_or_else(|| format!("class_{k}"))
}

/// The percentile interval, widened if needed so that it contains the
/// full-set value.
fn interval_around(values: &[Option<f64>], point: f64) -> Result<([f64; 2], usize)> {
    let iv = percentile_interval(values, CONFIDENCE_LEVEL)?;
    Ok(([iv.lo.min(point), iv.hi.max(point)], iv.n_undefined))
}

/// Assemble a report from the full-set values and per-replicate values.
/// Each replicate row holds the overall value followed by one value per class.
fn assemble(
    metric_name: &str,
    m: &DatasetManifest,
    full: &[Option<f64>],
    overall: f64,
    replicates: &[Vec<Option<f64>>],
    config: ConfigEcho,
) -> Result<EvalReport> {
    let overall_reps: Vec<Option<f64>> = replicates.iter().map(|r| r[0]).collect();
    let (overall_ci, skipped) = interval_around(&overall_reps, overall)?;
    let mut per_class = Vec::new();
    let mut undefined_classes = Vec::new();
    for (k, v) in full.iter().enumerate() {
        match v {
            Some(value) => {
                let reps: Vec<Option<f64>> = replicates.iter().map(|r| r[k + 1]).collect();
                let (ci, _) = interval_around(&reps, *value)?;
                per_class.push(ClassMetric {
                    class_id: k as u32,
                    name: class_name(m, k),
                    value: *value,
                    ci,
                });
            }
            None => undefined_classes.push(class_name(m, k)),
        }
    }
    Ok(EvalReport {
        metric_name: metric_name.to_string(),
        overall,
        overall_ci,
        per_class,
        undefined_classes,
        n_images: m.len(),
        skipped_resamples: skipped,
        config,
    })
}

/// mAP with per-class AP, each with a bootstrap interval over images.
pub fn evaluate_detection(gt: &DatasetManifest, dets: &[Detection], cfg: &DetEvalConfig) -> Result<EvalReport> {
    if gt.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let scene = DetectionScene::from_manifest(gt, dets)?;
    let prepared = scene.prepare(cfg.iou_threshold);
    let classes: Vec<u32> = (0..gt.label_names.len() as u32).collect();
    let full = prepared.per_class_ap(&prepared.all_slots(), &classes, cfg.mode);
    let overall = mean_ap_from(&full, cfg.empty_class)?;
    let replicates = bootstrap_replicates(scene.len(), cfg.resamples, cfg.seed, |idx| {
        let per = prepared.per_class_ap(idx, &classes, cfg.mode);
        let mut row = Vec::with_capacity(per.len() + 1);
        row.push(mean_ap_from(&per, cfg.empty_class).ok());
        row.extend(per);
        row
    })?;
    let config = ConfigEcho {
        iou_threshold: Some(cfg.iou_threshold),
        interpolation: Some(cfg.mode),
        empty_class: Some(cfg.empty_class),
        bootstrap_resamples: cfg.resamples,
        seed: cfg.seed,
        confidence_level: CONFIDENCE_LEVEL,
    };
    assemble("mAP", gt, &full, overall, &replicates, config)
}

/// Macro ROC-AUC with per-label AUC, each with a bootstrap interval.
pub fn evaluate_classification(gt: &DatasetManifest, preds: &[ScoreLine], cfg: &ClsEvalConfig) -> Result<EvalReport> {
    if gt.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let scene = ClassificationScene::from_manifest(gt, preds)?;
    let full = scene.per_label_auc(&scene.all_slots());
    let overall = macro_mean(&full).ok_or(Error::SingleClassOnly)?;
    let replicates = bootstrap_replicates(scene.len(), cfg.resamples, cfg.seed, |idx| {
        let per = scene.per_label_auc(idx);
        let mut row = Vec::with_capacity(per.len() + 1);
        row.push(macro_mean(&per));
        row.extend(per);
        row
    })?;
    let config = ConfigEcho {
        iou_threshold: None,
        interpolation: None,
        empty_class: None,
        bootstrap_resamples: cfg.resamples,
        seed: cfg.seed,
        confidence_level: CONFIDENCE_LEVEL,
    };
    assemble("macro_auc", gt, &full, overall, &replicates, config)
}
