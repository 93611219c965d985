//! ROC-AUC for multi-label classification.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::DatasetManifest;

/// Mann-Whitney estimate of the area under the ROC curve.
pub fn roc_auc(labels: &[bool], scores: &[f64]) -> Result<f64> {
    if labels.len() != scores.len() {
        return Err(Error::ShapeMismatch {
            expected: labels.len().to_string(),
            found: scores.len().to_string(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("NaN score".into()));
    }
    auc_inner(labels.iter().copied().zip(scores.iter().copied())).ok_or(Error::SingleClassOnly)
}

/// `None` when one class is absent.
pub(crate) fn auc_inner(pairs: impl Iterator<Item = (bool, f64)>) -> Option<f64> {
    let mut v: Vec<(f64, bool)> = pairs.map(|(l, s)| (s, l)).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n_pos = v.iter().filter(|p| p.1).count() as u128;
    let n_neg = v.len() as u128 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    // twice the Mann-Whitney U: 2 per concordant pair, 1 per tie
    let mut twice_u: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        let (mut p, mut n) = (0u128, 0u128);
        while j < v.len() && v[j].0 == v[i].0 {
            if v[j].1 {
                p += 1;
            } else {
                n += 1;
            }
            j += 1;
        }
        twice_u += 2 * p * neg_below + p * n;
        neg_below += n;
        i = j;
    }
    Some(twice_u as f64 / (2 * n_pos * n_neg) as f64)
}

/// One line of a classification scores JSONL file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreLine {
    pub image_id: String,
    pub scores: Vec<f64>,
}

pub fn parse_scores_jsonl(text: &str) -> Result<Vec<ScoreLine>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::MalformedRow {
                row: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Aligned N×L label and score matrices.
#[derive(Debug, Clone, Default)]
pub struct ClassificationScene {
    pub labels: Vec<Vec<bool>>,
    pub scores: Vec<Vec<f64>>,
    pub n_labels: usize,
}

impl ClassificationScene {
    pub fn new(labels: Vec<Vec<bool>>, scores: Vec<Vec<f64>>) -> Result<Self> {
        if labels.len() != scores.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} rows", labels.len()),
                found: format!("{} rows", scores.len()),
            });
        }
        let n_labels = labels.first().map_or(0, Vec::len);
        for (l, s) in labels.iter().zip(&scores) {
            if l.len() != n_labels || s.len() != n_labels {
                return Err(Error::ShapeMismatch {
                    expected: format!("{n_labels} labels"),
                    found: format!("{}/{} labels", l.len(), s.len()),
                });
            }
            if s.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument("non-finite score".into()));
            }
        }
        Ok(Self { labels, scores, n_labels })
    }

    /// Align predicted scores with manifest labels. Every manifest image needs
    /// a prediction; predictions for unknown images are an error.
    pub fn from_manifest(m: &DatasetManifest, preds: &[ScoreLine]) -> Result<Self> {
        let n_labels = m.label_names.len();
        let mut by_id: HashMap<&str, &ScoreLine> = HashMap::new();
        for p in preds {
            if m.find(&p.image_id).is_none() {
                return Err(Error::UnknownImage {
                    image_id: p.image_id.clone(),
                });
            }
            if p.scores.len() != n_labels {
                return Err(Error::ShapeMismatch {
                    expected: format!("{n_labels} scores"),
                    found: format!("{} scores for {}", p.scores.len(), p.image_id),
                });
            }
            by_id.insert(p.image_id.as_str(), p);
        }
        let mut labels = Vec::with_capacity(m.len());
        let mut scores = Vec::with_capacity(m.len());
        for r in &m.images {
            let p = by_id.get(r.image_id.as_str()).ok_or_else(|| Error::MissingPrediction {
                image_id: r.image_id.clone(),
            })?;
            let set = r.stratification_labels();
            labels.push((0..n_labels as u32).map(|k| set.contains(&k)).collect());
            scores.push(p.scores.clone());
        }
        let mut scene = Self::new(labels, scores)?;
        scene.n_labels = n_labels;
        Ok(scene)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// AUC of `label` over the rows at `slots`; `None` if one class is absent.
    pub fn label_auc(&self, slots: &[usize], label: usize) -> Option<f64> {
        auc_inner(slots.iter().map(|&i| (self.labels[i][label], self.scores[i][label])))
    }

    pub fn per_label_auc(&self, slots: &[usize]) -> Vec<Option<f64>> {
        (0..self.n_labels).map(|k| self.label_auc(slots, k)).collect()
    }

    pub fn all_slots(&self) -> Vec<usize> {
        (0..self.len()).collect()
    }
}

/// Mean of the defined entries; `None` if there are none.
pub fn macro_mean(values: &[Option<f64>]) -> Option<f64> {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    }
}
