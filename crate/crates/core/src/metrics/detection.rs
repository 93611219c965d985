//! Average precision at a fixed IoU threshold.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};
use crate::ingest::DatasetManifest;

/// A scored prediction on one image. The box score is the model confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub image_id: String,
    pub bbox: BBox,
}

/// One line of a detections JSONL file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionLine {
    pub image_id: String,
    pub class_id: u32,
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub score: f64,
}

impl TryFrom<DetectionLine> for Detection {
    type Error = Error;

    fn try_from(l: DetectionLine) -> Result<Self> {
        Ok(Detection {
            bbox: BBox::new(l.class_id, [l.x_min, l.y_min, l.x_max, l.y_max], l.score)?,
            image_id: l.image_id,
        })
    }
}

impl From<&Detection> for DetectionLine {
    fn from(d: &Detection) -> Self {
        let [x_min, y_min, x_max, y_max] = d.bbox.coords();
        DetectionLine {
            image_id: d.image_id.clone(),
            class_id: d.bbox.class_id(),
            x_min,
            y_min,
            x_max,
            y_max,
            score: d.bbox.score(),
        }
    }
}

/// Parse detections from JSON lines; blank lines are skipped. Line numbers in
/// errors are 1-based.
pub fn parse_detections_jsonl(text: &str) -> Result<Vec<Detection>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let line: DetectionLine = serde_json::from_str(l).map_err(|e| Error::MalformedRow {
                row: i + 1,
                message: e.to_string(),
            })?;
            Detection::try_from(line).map_err(|e| Error::MalformedRow {
                row: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApMode {
    /// Exact area under the precision envelope.
    #[default]
    Continuous,
    /// Envelope sampled at recall 0, 0.01, ..., 1.
    Points101,
}

impl std::str::FromStr for ApMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuous" => Ok(ApMode::Continuous),
            "points101" => Ok(ApMode::Points101),
            other => Err(Error::InvalidArgument(format!("unknown AP mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for ApMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ApMode::Continuous => "continuous",
            ApMode::Points101 => "points101",
        })
    }
}

/// How classes without ground truth enter the mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmptyClassPolicy {
    #[default]
    Exclude,
    Zero,
}

impl std::str::FromStr for EmptyClassPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exclude" => Ok(EmptyClassPolicy::Exclude),
            "zero" => Ok(EmptyClassPolicy::Zero),
            other => Err(Error::InvalidArgument(format!("unknown empty-class policy '{other}'"))),
        }
    }
}

/// Ground truths and detections grouped per image.
#[derive(Debug, Clone, Default)]
pub struct DetectionScene {
    pub images: Vec<SceneImage>,
}

#[derive(Debug, Clone, Default)]
pub struct SceneImage {
    pub image_id: String,
    pub gts: Vec<BBox>,
    /// Detections with their position in the original input list.
    pub dets: Vec<(usize, BBox)>,
}

impl DetectionScene {
    /// Group `dets` under the images of `gt`. Detections on images absent
    /// from the manifest are an error.
    pub fn from_manifest(gt: &DatasetManifest, dets: &[Detection]) -> Result<Self> {
        let mut images: Vec<SceneImage> = gt
            .images
            .iter()
            .map(|r| SceneImage {
                image_id: r.image_id.clone(),
                gts: r.boxes.clone(),
                dets: Vec::new(),
            })
            .collect();
        let index: HashMap<&str, usize> = gt
            .images
            .iter()
            .enumerate()
            .map(|(i, r)| (r.image_id.as_str(), i))
            .collect();
        for (k, d) in dets.iter().enumerate() {
            let &slot = index.get(d.image_id.as_str()).ok_or_else(|| Error::UnknownImage {
                image_id: d.image_id.clone(),
            })?;
            images[slot].dets.push((k, d.bbox.clone()));
        }
        Ok(Self { images })
    }

    /// Build a scene from per-image (ground truth, detections) pairs.
    /// Detection input order runs across images in the given order.
    pub fn from_pairs(pairs: Vec<(Vec<BBox>, Vec<BBox>)>) -> Self {
        let mut k = 0;
        let images = pairs
            .into_iter()
            .enumerate()
            .map(|(i, (gts, dets))| SceneImage {
                image_id: format!("image_{i}"),
                gts,
                dets: dets
                    .into_iter()
                    .map(|d| {
                        k += 1;
                        (k - 1, d)
                    })
                    .collect(),
            })
            .collect();
        Self { images }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn classes(&self) -> BTreeSet<u32> {
        self.images
            .iter()
            .flat_map(|im| im.gts.iter().chain(im.dets.iter().map(|(_, d)| d)))
            .map(BBox::class_id)
            .collect()
    }

    /// Precompute per-image matches for every class at `iou_thr`.
    pub fn prepare(&self, iou_thr: f64) -> PreparedScene {
        let images = self
            .images
            .iter()
            .map(|im| {
                let classes: BTreeSet<u32> = im
                    .gts
                    .iter()
                    .chain(im.dets.iter().map(|(_, d)| d))
                    .map(BBox::class_id)
                    .collect();
                classes
                    .into_iter()
                    .map(|c| (c, match_class(im, c, iou_thr)))
                    .collect()
            })
            .collect();
        PreparedScene { images }
    }
}

/// Match results for one (image, class).
#[derive(Debug, Clone, Default)]
pub struct ClassMatches {
    pub n_gt: usize,
    /// (score, original detection index, true positive)
    pub dets: Vec<(f64, usize, bool)>,
}

fn match_class(im: &SceneImage, class_id: u32, iou_thr: f64) -> ClassMatches {
    let gts: Vec<&BBox> = im.gts.iter().filter(|g| g.class_id() == class_id).collect();
    let mut dets: Vec<&(usize, BBox)> = im.dets.iter().filter(|(_, d)| d.class_id() == class_id).collect();
    dets.sort_by(|a, b| b.1.score().total_cmp(&a.1.score()).then(a.0.cmp(&b.0)));

    let mut taken = vec![false; gts.len()];
    let matched = dets
        .iter()
        .map(|(k, d)| {
            let mut best: Option<(usize, f64)> = None;
            for (g, gt) in gts.iter().enumerate() {
                if taken[g] {
                    continue;
                }
                let v = iou(d, gt);
                if v >= iou_thr && best.map_or(true, |(_, bv)| v > bv) {
                    best = Some((g, v));
                }
            }
            if let Some((g, _)) = best {
                taken[g] = true;
            }
            (d.score(), *k, best.is_some())
        })
        .collect();
    ClassMatches {
        n_gt: gts.len(),
        dets: matched,
    }
}

#[derive(Debug, Clone)]
pub struct PreparedScene {
    images: Vec<BTreeMap<u32, ClassMatches>>,
}

impl PreparedScene {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// AP of one class over the images at `slots` (repeats allowed). `None`
    /// when those images hold no ground truth of the class.
    pub fn average_precision(&self, slots: &[usize], class_id: u32, mode: ApMode) -> Option<f64> {
        let mut n_gt = 0;
        // (score, original index, slot position, tp)
        let mut entries: Vec<(f64, usize, usize, bool)> = Vec::new();
        for (pos, &s) in slots.iter().enumerate() {
            if let Some(cm) = self.images[s].get(&class_id) {
                n_gt += cm.n_gt;
                entries.extend(cm.dets.iter().map(|&(score, k, tp)| (score, k, pos, tp)));
            }
        }
        if n_gt == 0 {
            return None;
        }
        entries.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let tps: Vec<bool> = entries.into_iter().map(|e| e.3).collect();
        Some(ap_from_ranked(&tps, n_gt, mode))
    }

    /// Per-class AP for `classes` over `slots`.
    pub fn per_class_ap(&self, slots: &[usize], classes: &[u32], mode: ApMode) -> Vec<Option<f64>> {
        classes
            .iter()
            .map(|&c| self.average_precision(slots, c, mode))
            .collect()
    }

    pub fn all_slots(&self) -> Vec<usize> {
        (0..self.images.len()).collect()
    }
}

/// AP from detections already ranked by descending score.
pub fn ap_from_ranked(tps: &[bool], n_gt: usize, mode: ApMode) -> f64 {
    if tps.is_empty() || n_gt == 0 {
        return 0.0;
    }
    let mut recall = Vec::with_capacity(tps.len());
    let mut precision = Vec::with_capacity(tps.len());
    let mut tp = 0usize;
    for (i, &hit) in tps.iter().enumerate() {
        tp += hit as usize;
        recall.push(tp as f64 / n_gt as f64);
        precision.push(tp as f64 / (i + 1) as f64);
    }
    let mut envelope = precision;
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    match mode {
        ApMode::Continuous => {
            let mut prev = 0.0;
            let mut area = 0.0;
            for (r, p) in recall.iter().zip(&envelope) {
                area += (r - prev) * p;
                prev = *r;
            }
            area
        }
        ApMode::Points101 => {
            let mut sum = 0.0;
            let mut i = 0;
            for t in 0..=100 {
                let r = t as f64 / 100.0;
                while i < recall.len() && recall[i] < r {
                    i += 1;
                }
                if i < recall.len() {
                    sum += envelope[i];
                }
            }
            sum / 101.0
        }
    }
}

/// AP for a single class; `None` when the class has no ground truth.
pub fn average_precision(scene: &DetectionScene, class_id: u32, iou_thr: f64, mode: ApMode) -> Option<f64> {
    let prepared = scene.prepare(iou_thr);
    prepared.average_precision(&prepared.all_slots(), class_id, mode)
}

/// Mean of per-class APs. Undefined classes are excluded or counted as zero
/// per `policy`; if every class is undefined the result is `NoGroundTruth`.
pub fn mean_ap_from(per_class: &[Option<f64>], policy: EmptyClassPolicy) -> Result<f64> {
    if per_class.iter().all(Option::is_none) {
        return Err(Error::NoGroundTruth);
    }
    let values: Vec<f64> = match policy {
        EmptyClassPolicy::Exclude => per_class.iter().flatten().copied().collect(),
        EmptyClassPolicy::Zero => per_class.iter().map(|v| v.unwrap_or(0.0)).collect(),
    };
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

pub fn mean_ap(
    scene: &DetectionScene,
    classes: &[u32],
    iou_thr: f64,
    mode: ApMode,
    policy: EmptyClassPolicy,
) -> Result<f64> {
    let prepared = scene.prepare(iou_thr);
    mean_ap_from(&prepared.per_class_ap(&prepared.all_slots(), classes, mode), policy)
}
