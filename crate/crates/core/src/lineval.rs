//! Linear evaluation of frozen features: a per-label logistic head trained
//! on stratified fractions of the training set and scored by ROC-AUC.

use std::collections::BTreeSet;
use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::{read_bytes, write_atomic};
use crate::metrics::bootstrap::{trial_band, TrialBand};
use crate::metrics::classification::{auc_inner, macro_mean};
use crate::rng::{derive, SplitMix64};
use crate::stratify::stratified_subsample_indices;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    /// N x D
    pub features: Array2<f64>,
    /// N x L
    pub labels: Array2<bool>,
    pub ids: Vec<String>,
}

impl FeatureSet {
    pub fn new(features: Array2<f64>, labels: Array2<bool>, ids: Vec<String>) -> Result<Self> {
        let n = features.nrows();
        if labels.nrows() != n || ids.len() != n {
            return Err(Error::ShapeMismatch {
                expected: format!("{n} rows"),
                found: format!("{} label rows, {} ids", labels.nrows(), ids.len()),
            });
        }
        if labels.ncols() == 0 {
            return Err(Error::InvalidArgument("feature set needs at least one label".into()));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite feature".into()));
        }
        if ids.iter().any(|id| id.contains('\n')) {
            return Err(Error::InvalidArgument("ids may not contain newlines".into()));
        }
        Ok(Self { features, labels, ids })
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_labels(&self) -> usize {
        self.labels.ncols()
    }

    /// Labels whose column lacks positives or negatives.
    pub fn degenerate_labels(&self) -> Vec<usize> {
        (0..self.n_labels())
            .filter(|&l| {
                let pos = self.labels.column(l).iter().filter(|&&v| v).count();
                pos == 0 || pos == self.len()
            })
            .collect()
    }

    pub fn label_sets(&self) -> Vec<BTreeSet<u32>> {
        self.labels
            .rows()
            .into_iter()
            .map(|r| r.iter().enumerate().filter(|(_, &v)| v).map(|(l, _)| l as u32).collect())
            .collect()
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            features: self.features.select(ndarray::Axis(0), rows),
            labels: self.labels.select(ndarray::Axis(0), rows),
            ids: rows.iter().map(|&i| self.ids[i].clone()).collect(),
        }
    }
}

const BTFX_MAGIC: &[u8; 4] = b"BTFX";
const BTFX_VERSION: u32 = 1;

/// Feature file: magic `BTFX`, version `u32`, then `N`, `D`, `L` as `u64`
/// (all little-endian), `N * D` `f64` features row-major, `N * L` label
/// bytes (0 or 1), and finally the ids joined by `\n`.
pub fn write_btfx(fs: &FeatureSet) -> Vec<u8> {
    let (n, d, l) = (fs.len(), fs.features.ncols(), fs.n_labels());
    let mut out = Vec::with_capacity(32 + 8 * n * d + n * l);
    out.extend_from_slice(BTFX_MAGIC);
    out.extend_from_slice(&BTFX_VERSION.to_le_bytes());
    for v in [n, d, l] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for v in fs.features.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend(fs.labels.iter().map(|&b| b as u8));
    out.extend_from_slice(fs.ids.join("\n").as_bytes());
    out
}

pub fn read_btfx(bytes: &[u8]) -> Result<FeatureSet> {
    let bad = |m: String| Error::InvalidBinary(m);
    if bytes.len() < 32 || &bytes[..4] != BTFX_MAGIC {
        return Err(bad("missing BTFX header".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != BTFX_VERSION {
        return Err(Error::SchemaVersionMismatch {
            found: version.to_string(),
            expected: BTFX_VERSION.to_string(),
        });
    }
    let dim = |k: usize| u64::from_le_bytes(bytes[8 + 8 * k..16 + 8 * k].try_into().expect("8 bytes")) as usize;
    let (n, d, l) = (dim(0), dim(1), dim(2));
    let feat_end = n
        .checked_mul(d)
        .and_then(|x| x.checked_mul(8))
        .and_then(|x| x.checked_add(32))
        .ok_or_else(|| bad("dimensions overflow".into()))?;
    let label_end = n
        .checked_mul(l)
        .and_then(|x| x.checked_add(feat_end))
        .ok_or_else(|| bad("dimensions overflow".into()))?;
    if bytes.len() < label_end {
        return Err(bad(format!("file too short for {n}x{d} features and {n}x{l} labels")));
    }
    let features: Vec<f64> = bytes[32..feat_end]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let labels = bytes[feat_end..label_end]
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(bad(format!("label byte {other} is not 0 or 1"))),
        })
        .collect::<Result<Vec<bool>>>()?;
    let text = std::str::from_utf8(&bytes[label_end..]).map_err(|e| bad(format!("ids are not UTF-8: {e}")))?;
    let ids: Vec<String> = if n == 0 { Vec::new() } else { text.split('\n').map(String::from).collect() };
    if ids.len() != n {
        return Err(bad(format!("expected {n} ids, found {}", ids.len())));
    }
    FeatureSet::new(
        Array2::from_shape_vec((n, d), features).expect("length checked"),
        Array2::from_shape_vec((n, l), labels).expect("length checked"),
        ids,
    )
}

pub fn load_btfx(path: &Path) -> Result<FeatureSet> {
    read_btfx(&read_bytes(path)?)
}

pub fn save_btfx(fs: &FeatureSet, path: &Path) -> Result<()> {
    write_atomic(path, &write_btfx(fs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearConfig {
    pub lr: f64,
    pub epochs: usize,
    pub l2: f64,
    /// Recorded for provenance; zero initialisation uses no randomness.
    pub seed: u64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        Self {
            lr: 0.1,
            epochs: 500,
            l2: 1e-4,
            seed: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHead {
    /// D x L
    pub weights: Array2<f64>,
    pub bias: Vec<f64>,
    pub config: LinearConfig,
}

impl LinearHead {
    pub fn zeros(d: usize, l: usize, config: LinearConfig) -> Self {
        Self {
            weights: Array2::zeros((d, l)),
            bias: vec![0.0; l],
            config,
        }
    }

    fn logits(&self, x: &Array2<f64>) -> Array2<f64> {
        let (n, d) = x.dim();
        let l = self.bias.len();
        let mut z = Array2::zeros((n, l));
        for i in 0..n {
            for k in 0..l {
                let mut acc = self.bias[k];
                for j in 0..d {
                    acc += x[[i, j]] * self.weights[[j, k]];
                }
                z[[i, k]] = acc;
            }
        }
        z
    }

    /// Sigmoid probabilities, N x L.
    pub fn predict(&self, x: &Array2<f64>) -> Array2<f64> {
        self.logits(x).mapv(sigmoid)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `-log sigmoid(z)` for label 1, `-log(1 - sigmoid(z))` for label 0.
fn bce_with_logit(z: f64, y: bool) -> f64 {
    let softplus = |t: f64| if t > 0.0 { t + (-t).exp().ln_1p() } else { t.exp().ln_1p() };
    if y {
        softplus(-z)
    } else {
        softplus(z)
    }
}

/// Mean per-element cross-entropy plus `l2 * |W|^2`, with gradients
/// `(dW, db)`.
pub fn head_loss_and_gradient(head: &LinearHead, fs: &FeatureSet) -> (f64, Array2<f64>, Vec<f64>) {
    let (n, d) = fs.features.dim();
    let l = fs.n_labels();
    let z = head.logits(&fs.features);
    let count = (n * l) as f64;
    let mut loss = 0.0;
    let mut resid = Array2::zeros((n, l));
    for i in 0..n {
        for k in 0..l {
            let y = fs.labels[[i, k]];
            loss += bce_with_logit(z[[i, k]], y);
            resid[[i, k]] = (sigmoid(z[[i, k]]) - if y { 1.0 } else { 0.0 }) / count;
        }
    }
    loss /= count;
    let l2 = head.config.l2;
    loss += l2 * head.weights.iter().map(|w| w * w).sum::<f64>();
    let mut gw = Array2::zeros((d, l));
    let mut gb = vec![0.0; l];
    for k in 0..l {
        for i in 0..n {
            gb[k] += resid[[i, k]];
        }
        for j in 0..d {
            let mut acc = 0.0;
            for i in 0..n {
                acc += fs.features[[i, j]] * resid[[i, k]];
            }
            gw[[j, k]] = acc + 2.0 * l2 * head.weights[[j, k]];
        }
    }
    (loss, gw, gb)
}

/// Full-batch gradient descent from zero weights.
pub fn train_linear_head(fs: &FeatureSet, cfg: &LinearConfig) -> Result<LinearHead> {
    if fs.len() < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 samples, got {}", fs.len())));
    }
    if fs.degenerate_labels().len() == fs.n_labels() {
        return Err(Error::DegenerateLabels);
    }
    if !(cfg.lr > 0.0 && cfg.l2 >= 0.0) {
        return Err(Error::InvalidArgument("lr must be > 0 and l2 >= 0".into()));
    }
    let mut head = LinearHead::zeros(fs.features.ncols(), fs.n_labels(), *cfg);
    for epoch in 0..cfg.epochs {
        let (loss, gw, gb) = head_loss_and_gradient(&head, fs);
        if !loss.is_finite() {
            return Err(Error::DivergenceDetected { epoch });
        }
        head.weights.scaled_add(-cfg.lr, &gw);
        for (b, g) in head.bias.iter_mut().zip(&gb) {
            *b -= cfg.lr * g;
        }
    }
    Ok(head)
}

/// Per-label AUC of `head` on `fs`; `None` for labels lacking a class.
pub fn per_label_auc(head: &LinearHead, fs: &FeatureSet) -> Vec<Option<f64>> {
    let p = head.predict(&fs.features);
    (0..fs.n_labels())
        .map(|k| auc_inner((0..fs.len()).map(|i| (fs.labels[[i, k]], p[[i, k]]))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolCell {
    pub fraction: f64,
    pub repeat: usize,
    pub subsample_seed: u64,
    pub n_train: usize,
    pub macro_auc: f64,
    pub per_label_auc: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionSummary {
    pub fraction: f64,
    pub macro_auc: TrialBand,
    /// Per-label bands; `None` where the label is excluded.
    pub per_label_auc: Vec<Option<TrialBand>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub fractions: Vec<f64>,
    pub repeats: usize,
    pub seed: u64,
    pub config: LinearConfig,
    pub n_train: usize,
    pub n_test: usize,
    /// Test-set label columns lacking a class; left out of every macro AUC.
    pub excluded_labels: Vec<usize>,
    pub summary: Vec<FractionSummary>,
    pub cells: Vec<ProtocolCell>,
}

impl ProtocolReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Fit one head per (fraction, repeat) on a stratified subsample of
/// `train` and score it on `test`. Cell `c` (fractions outer, repeats
/// inner) subsamples with seed `derive(seed, c)`. Cells run on the current
/// rayon pool and are reported in that order.
pub fn evaluate_protocol(
    train: &FeatureSet,
    test: &FeatureSet,
    fractions: &[f64],
    repeats: usize,
    cfg: &LinearConfig,
    seed: u64,
) -> Result<ProtocolReport> {
    if repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be at least 1".into()));
    }
    if fractions.is_empty() || fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
        return Err(Error::InvalidArgument(format!("fractions must lie in (0, 1], got {fractions:?}")));
    }
    if train.n_labels() != test.n_labels() || train.features.ncols() != test.features.ncols() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} features, {} labels", train.features.ncols(), train.n_labels()),
            found: format!("{} features, {} labels", test.features.ncols(), test.n_labels()),
        });
    }
    let excluded_labels = test.degenerate_labels();
    if excluded_labels.len() == test.n_labels() {
        return Err(Error::DegenerateLabels);
    }
    let label_sets = train.label_sets();
    let jobs: Vec<(usize, f64, usize)> = fractions
        .iter()
        .enumerate()
        .flat_map(|(fi, &f)| (0..repeats).map(move |r| (fi * repeats + r, f, r)))
        .collect();
    let cells = jobs
        .par_iter()
        .map(|&(c, fraction, repeat)| {
            let subsample_seed = derive(seed, c as u64);
            let rows = stratified_subsample_indices(&label_sets, fraction, subsample_seed)?;
            let head = train_linear_head(&train.select(&rows), cfg)?;
            let per = per_label_auc(&head, test);
            let macro_auc = macro_mean(&per).ok_or(Error::DegenerateLabels)?;
            Ok(ProtocolCell {
                fraction,
                repeat,
                subsample_seed,
                n_train: rows.len(),
                macro_auc,
                per_label_auc: per,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut summary = Vec::new();
    for (fi, &fraction) in fractions.iter().enumerate() {
        let group = &cells[fi * repeats..(fi + 1) * repeats];
        let macro_vals: Vec<f64> = group.iter().map(|c| c.macro_auc).collect();
        let per_label_auc = (0..test.n_labels())
            .map(|k| {
                let v: Vec<f64> = group.iter().filter_map(|c| c.per_label_auc[k]).collect();
                trial_band(&v).ok()
            })
            .collect();
        summary.push(FractionSummary {
            fraction,
            macro_auc: trial_band(&macro_vals)?,
            per_label_auc,
        });
    }
    Ok(ProtocolReport {
        fractions: fractions.to_vec(),
        repeats,
        seed,
        config: *cfg,
        n_train: train.len(),
        n_test: test.len(),
        excluded_labels,
        summary,
        cells,
    })
}

pub const FIXTURE_SIGNAL: f64 = 1.5;
pub const FIXTURE_SEED: u64 = 1;

/// The shipped linear-evaluation fixture: 1000 training and 500 test rows,
/// 16 features, 4 labels.
pub fn fixture_pair() -> (FeatureSet, FeatureSet) {
    (
        synthetic_features(1000, 16, 4, FIXTURE_SIGNAL, FIXTURE_SEED, "train"),
        synthetic_features(500, 16, 4, FIXTURE_SIGNAL, FIXTURE_SEED, "test"),
    )
}

/// Synthetic frozen features: each of `l` labels shifts the features along
/// its own random direction of length `signal`, on top of unit Gaussian
/// noise. Label prevalences cycle through 0.35, 0.25, 0.15 and 0.1.
pub fn synthetic_features(n: usize, d: usize, l: usize, signal: f64, seed: u64, id_prefix: &str) -> FeatureSet {
    let mut rng = SplitMix64::derived(seed, 0);
    let directions: Vec<Vec<f64>> = (0..l)
        .map(|_| {
            let v: Vec<f64> = (0..d).map(|_| rng.next_gaussian()).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x * signal / norm).collect()
        })
        .collect();
    let prevalence = [0.35, 0.25, 0.15, 0.1];
    // directions depend only on `seed`; samples on the stream for `id_prefix`
    let mut rng = SplitMix64::derived(seed, 1 + id_prefix.bytes().fold(0u64, |h, b| h.wrapping_mul(31).wrapping_add(b as u64)));
    let mut labels = Array2::from_elem((n, l), false);
    let mut features = Array2::zeros((n, d));
    for i in 0..n {
        for k in 0..l {
            labels[[i, k]] = rng.next_f64() < prevalence[k % prevalence.len()];
        }
        for j in 0..d {
            let mut v = rng.next_gaussian();
            for k in 0..l {
                if labels[[i, k]] {
                    v += directions[k][j];
                }
            }
            features[[i, j]] = v;
        }
    }
    let ids = (0..n).map(|i| format!("{id_prefix}{i:05}")).collect();
    FeatureSet::new(features, labels, ids).expect("consistent shapes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn btfx_round_trip() {
        let fs = synthetic_features(7, 3, 2, 1.0, 1, "a");
        assert_eq!(read_btfx(&write_btfx(&fs)).unwrap(), fs);
    }

    #[test]
    fn btfx_rejects_bad_input() {
        let fs = synthetic_features(3, 2, 1, 1.0, 1, "a");
        let mut b = write_btfx(&fs);
        assert!(matches!(read_btfx(&b[..20]), Err(Error::InvalidBinary(_))));
        b[4] = 9;
        assert!(matches!(read_btfx(&b), Err(Error::SchemaVersionMismatch { .. })));
        let mut b = write_btfx(&fs);
        b[32 + 8 * 6] = 2;
        assert!(matches!(read_btfx(&b), Err(Error::InvalidBinary(_))));
    }

    #[test]
    fn untrained_head_scores_one_half() {
        let fs = synthetic_features(50, 4, 2, 2.0, 2, "t");
        let cfg = LinearConfig { epochs: 0, ..Default::default() };
        let head = train_linear_head(&fs, &cfg).unwrap();
        assert!(head.weights.iter().all(|&w| w == 0.0));
        assert!(head.predict(&fs.features).iter().all(|&p| p == 0.5));
        for auc in per_label_auc(&head, &fs) {
            assert_eq!(auc, Some(0.5));
        }
    }

    #[test]
    fn degenerate_labels_rejected() {
        let features = Array2::from_shape_vec((3, 1), vec![0.0, 1.0, 2.0]).unwrap();
        let labels = Array2::from_elem((3, 2), true);
        let fs = FeatureSet::new(features, labels, vec!["a".into(), "b".into(), "c".into()]).unwrap();
        assert!(matches!(train_linear_head(&fs, &LinearConfig::default()), Err(Error::DegenerateLabels)));
    }

    #[test]
    fn stable_cross_entropy() {
        assert!((bce_with_logit(0.0, true) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(bce_with_logit(800.0, false).is_finite());
        assert!(bce_with_logit(-800.0, true).is_finite());
        assert!(bce_with_logit(800.0, true) < 1e-300);
    }
}
