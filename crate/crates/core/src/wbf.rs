//! Weighted box fusion of duplicate multi-rater annotations.
//!
//! Fusion runs per class. Boxes are visited in descending effective score
//! (`score * rater_weight`, ties by input order). Each box joins the cluster
//! whose *current fused box* overlaps it most, provided that IoU exceeds the
//! threshold; otherwise it opens a new cluster. A cluster's fused box is the
//! weighted mean of its members' coordinates with weights
//! `score * rater_weight`.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};
use crate::ingest::{DatasetManifest, ImageRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    /// Fused score is the mean of member scores.
    #[default]
    Mean,
    /// Mean member score times `min(|members|, R) / R`, where `R` is the
    /// number of distinct raters among the input boxes.
    MeanScaledByRaterCount,
}

impl std::str::FromStr for ScoreMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(ScoreMode::Mean),
            "mean_scaled_by_rater_count" | "scaled" => Ok(ScoreMode::MeanScaledByRaterCount),
            other => Err(Error::InvalidArgument(format!("unknown score mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for ScoreMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScoreMode::Mean => "mean",
            ScoreMode::MeanScaledByRaterCount => "mean_scaled_by_rater_count",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    iou_threshold: f64,
    rater_weights: BTreeMap<String, f64>,
    score_mode: ScoreMode,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.4,
            rater_weights: BTreeMap::new(),
            score_mode: ScoreMode::Mean,
        }
    }
}

impl FusionConfig {
    pub fn new(
        iou_threshold: f64,
        rater_weights: BTreeMap<String, f64>,
        score_mode: ScoreMode,
    ) -> Result<Self> {
        if !(iou_threshold > 0.0 && iou_threshold <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "iou threshold {iou_threshold} outside (0, 1]"
            )));
        }
        if let Some((id, w)) = rater_weights.iter().find(|(_, w)| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "rater weight for '{id}' must be positive, got {w}"
            )));
        }
        Ok(Self {
            iou_threshold,
            rater_weights,
            score_mode,
        })
    }

    pub fn iou_threshold(&self) -> f64 {
        self.iou_threshold
    }

    pub fn score_mode(&self) -> ScoreMode {
        self.score_mode
    }

    pub fn rater_weights(&self) -> &BTreeMap<String, f64> {
        &self.rater_weights
    }

    pub fn rater_weight(&self, rater_id: Option<&str>) -> f64 {
        rater_id
            .and_then(|r| self.rater_weights.get(r))
            .copied()
            .unwrap_or(1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedCluster {
    pub members: Vec<BBox>,
    /// Positions of `members` in the input slice.
    pub member_indices: Vec<usize>,
    pub fused: BBox,
}

struct Building {
    members: Vec<usize>,
    fused: BBox,
}

fn weighted_coords(members: &[usize], boxes: &[BBox], weights: &[f64]) -> [f64; 4] {
    let total: f64 = members.iter().map(|&i| weights[i]).sum();
    let mut acc = [0.0; 4];
    let mut lo = [f64::INFINITY; 4];
    let mut hi = [f64::NEG_INFINITY; 4];
    for &i in members {
        // zero total weight (all scores 0) degrades to the plain mean
        let w = if total > 0.0 { weights[i] } else { 1.0 };
        for (k, c) in boxes[i].coords().into_iter().enumerate() {
            acc[k] += w * c;
            lo[k] = lo[k].min(c);
            hi[k] = hi[k].max(c);
        }
    }
    let denom = if total > 0.0 { total } else { members.len() as f64 };
    let mut out = [0.0; 4];
    for k in 0..4 {
        out[k] = (acc[k] / denom).clamp(lo[k], hi[k]);
    }
    out
}

/// Fuse the boxes of one image. Output clusters are ordered by descending
/// fused score; ties keep class-ascending, creation order.
pub fn fuse_image(boxes: &[BBox], cfg: &FusionConfig) -> Result<Vec<FusedCluster>> {
    let weights: Vec<f64> = boxes
        .iter()
        .map(|b| b.score() * cfg.rater_weight(b.rater_id()))
        .collect();
    let n_raters = boxes
        .iter()
        .filter_map(BBox::rater_id)
        .collect::<BTreeSet<_>>()
        .len()
        .max(1);
    let classes: BTreeSet<u32> = boxes.iter().map(BBox::class_id).collect();

    let mut out = Vec::new();
    for class_id in classes {
        let mut order: Vec<usize> = (0..boxes.len())
            .filter(|&i| boxes[i].class_id() == class_id)
            .collect();
        order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]));

        let mut clusters: Vec<Building> = Vec::new();
        for i in order {
            let mut best: Option<(usize, f64)> = None;
            for (k, cl) in clusters.iter().enumerate() {
                let v = iou(&boxes[i], &cl.fused);
                if v > cfg.iou_threshold && best.map_or(true, |(_, bv)| v > bv) {
                    best = Some((k, v));
                }
            }
            match best {
                Some((k, _)) => {
                    let cl = &mut clusters[k];
                    cl.members.push(i);
                    let coords = weighted_coords(&cl.members, boxes, &weights);
                    cl.fused = BBox::new(class_id, coords, 1.0)?;
                }
                None => clusters.push(Building {
                    members: vec![i],
                    fused: BBox::new(class_id, boxes[i].coords(), 1.0)?,
                }),
            }
        }

        for cl in clusters {
            let n = cl.members.len();
            let mean = cl.members.iter().map(|&i| boxes[i].score()).sum::<f64>() / n as f64;
            let score = match cfg.score_mode {
                ScoreMode::Mean => mean,
                ScoreMode::MeanScaledByRaterCount => {
                    mean * n.min(n_raters) as f64 / n_raters as f64
                }
            };
            out.push(FusedCluster {
                members: cl.members.iter().map(|&i| boxes[i].clone()).collect(),
                fused: cl.fused.with_score(score.clamp(0.0, 1.0))?,
                member_indices: cl.members,
            });
        }
    }
    out.sort_by(|a, b| b.fused.score().total_cmp(&a.fused.score()));
    Ok(out)
}

/// Replace every image's boxes by its fused boxes. Images are processed in
/// parallel on the current rayon pool; output order matches input order.
pub fn fuse_manifest(m: &DatasetManifest, cfg: &FusionConfig) -> Result<DatasetManifest> {
    let images = m
        .images
        .par_iter()
        .map(|rec| {
            if rec.boxes.is_empty() {
                return Ok(rec.clone());
            }
            let fused = fuse_image(&rec.boxes, cfg)?;
            Ok(ImageRecord {
                boxes: fused.into_iter().map(|c| c.fused).collect(),
                ..rec.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut provenance = m.provenance.clone();
    provenance.set("wbf.iou_threshold", cfg.iou_threshold.to_string());
    provenance.set("wbf.score_mode", cfg.score_mode.to_string());
    let weights = cfg
        .rater_weights
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(",");
    provenance.set("wbf.rater_weights", weights);
    DatasetManifest::new(m.label_names.clone(), images, provenance)
}
