//! Iterative stratification for multi-label data.
//!
//! Each fold `k` starts with a desired size `c_k = f_k * |D|` and, for every
//! label `l`, a desired label count `c_kl = f_k * |D_l|`. While labelled
//! examples remain, the label with the fewest remaining unassigned examples
//! is processed (ties: lower label id). Each of its unassigned examples, in
//! dataset order, goes to the fold with the largest remaining `c_kl`, then
//! the largest remaining `c_k`, then a seeded uniform choice among the
//! remaining ties. After an assignment `c_k` and `c_kl` for every label of
//! the example are decremented. Unlabelled examples are placed last by the
//! largest remaining `c_k` with the same seeded tie-break.
//!
//! The only randomness is the tie-break, drawn from [`SplitMix64`] seeded
//! with the split seed; a draw happens only when more than one fold is tied.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::DatasetManifest;
use crate::rng::SplitMix64;

pub const SPLIT_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    fold_names: Vec<String>,
    fold_fractions: Vec<f64>,
    seed: u64,
}

impl SplitSpec {
    pub fn new(fold_names: Vec<String>, fold_fractions: Vec<f64>, seed: u64) -> Result<Self> {
        if fold_names.len() < 2 {
            return Err(Error::InvalidSplitSpec("at least two folds are required".into()));
        }
        if fold_names.len() != fold_fractions.len() {
            return Err(Error::InvalidSplitSpec(format!(
                "{} fold names but {} fractions",
                fold_names.len(),
                fold_fractions.len()
            )));
        }
        if fold_names.iter().collect::<BTreeSet<_>>().len() != fold_names.len() {
            return Err(Error::InvalidSplitSpec("fold names must be distinct".into()));
        }
        if let Some(f) = fold_fractions.iter().find(|f| !(**f > 0.0 && **f < 1.0)) {
            return Err(Error::InvalidSplitSpec(format!("fraction {f} outside (0, 1)")));
        }
        let total: f64 = fold_fractions.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSplitSpec(format!("fractions sum to {total}, not 1")));
        }
        Ok(Self {
            fold_names,
            fold_fractions,
            seed,
        })
    }

    pub fn fold_names(&self) -> &[String] {
        &self.fold_names
    }

    pub fn fold_fractions(&self) -> &[f64] {
        &self.fold_fractions
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Assign each example (given by its label set) to a fold index.
pub fn iterative_stratify(label_sets: &[BTreeSet<u32>], fractions: &[f64], seed: u64) -> Result<Vec<usize>> {
    if label_sets.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = label_sets.len();
    let n_folds = fractions.len();
    let n_labels = label_sets
        .iter()
        .flat_map(|s| s.iter())
        .max()
        .map_or(0, |&m| m as usize + 1);

    let mut label_totals = vec![0usize; n_labels];
    for s in label_sets {
        for &l in s {
            label_totals[l as usize] += 1;
        }
    }

    let mut fold_left: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut label_left: Vec<Vec<f64>> = fractions
        .iter()
        .map(|f| label_totals.iter().map(|&t| f * t as f64).collect())
        .collect();
    let mut remaining = label_totals.clone();

    // examples per label, in dataset order
    let mut by_label: Vec<Vec<usize>> = vec![Vec::new(); n_labels];
    for (i, s) in label_sets.iter().enumerate() {
        for &l in s {
            by_label[l as usize].push(i);
        }
    }

    let mut rng = SplitMix64::new(seed);
    let mut fold_of: Vec<Option<usize>> = vec![None; n];

    fn argmax_ties(values: impl Iterator<Item = (usize, f64)>) -> Vec<usize> {
        let mut best = f64::NEG_INFINITY;
        let mut ties = Vec::new();
        for (k, v) in values {
            if v > best {
                best = v;
                ties.clear();
                ties.push(k);
            } else if v == best {
                ties.push(k);
            }
        }
        ties
    }

    let pick_fold = |candidates: Vec<usize>, fold_left: &[f64], rng: &mut SplitMix64| -> usize {
        let ties = argmax_ties(candidates.iter().map(|&k| (k, fold_left[k])));
        if ties.len() == 1 {
            ties[0]
        } else {
            ties[rng.below(ties.len())]
        }
    };

    loop {
        let next = (0..n_labels)
            .filter(|&l| remaining[l] > 0)
            .min_by_key(|&l| (remaining[l], l));
        let Some(label) = next else { break };

        for &i in &by_label[label] {
            if fold_of[i].is_some() {
                continue;
            }
            let by_label_demand = argmax_ties((0..n_folds).map(|k| (k, label_left[k][label])));
            let fold = if by_label_demand.len() == 1 {
                by_label_demand[0]
            } else {
                pick_fold(by_label_demand, &fold_left, &mut rng)
            };
            fold_of[i] = Some(fold);
            fold_left[fold] -= 1.0;
            for &l in &label_sets[i] {
                label_left[fold][l as usize] -= 1.0;
                remaining[l as usize] -= 1;
            }
        }
    }

    for i in 0..n {
        if fold_of[i].is_none() {
            let fold = pick_fold((0..n_folds).collect(), &fold_left, &mut rng);
            fold_of[i] = Some(fold);
            fold_left[fold] -= 1.0;
        }
    }

    Ok(fold_of.into_iter().map(|f| f.expect("every example assigned")).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitAssignment {
    pub assignment: BTreeMap<String, String>,
    pub spec: SplitSpec,
    /// (fold name, label id) -> number of images in that fold carrying the label.
    pub per_label_counts: BTreeMap<(String, u32), usize>,
}

#[derive(Serialize, Deserialize)]
struct SplitFile {
    version: String,
    spec: SplitSpec,
    assignment: BTreeMap<String, String>,
}

impl SplitAssignment {
    /// Image ids of one fold, sorted.
    pub fn fold(&self, name: &str) -> Vec<&str> {
        self.assignment
            .iter()
            .filter(|(_, f)| f.as_str() == name)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let file = SplitFile {
            version: SPLIT_VERSION.to_string(),
            spec: self.spec.clone(),
            assignment: self.assignment.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file)?;
        s.push('\n');
        Ok(s)
    }

    /// Rebuild an assignment from its JSON form, recomputing label counts
    /// against `m`.
    pub fn from_json(text: &str, m: &DatasetManifest) -> Result<Self> {
        let file: SplitFile = serde_json::from_str(text)?;
        if file.version != SPLIT_VERSION {
            return Err(Error::SchemaVersionMismatch {
                found: file.version,
                expected: SPLIT_VERSION.to_string(),
            });
        }
        let spec = SplitSpec::new(file.spec.fold_names, file.spec.fold_fractions, file.spec.seed)?;
        let per_label_counts = count_labels(m, &file.assignment)?;
        Ok(Self {
            assignment: file.assignment,
            spec,
            per_label_counts,
        })
    }
}

fn count_labels(
    m: &DatasetManifest,
    assignment: &BTreeMap<String, String>,
) -> Result<BTreeMap<(String, u32), usize>> {
    let mut counts = BTreeMap::new();
    for rec in &m.images {
        let fold = assignment.get(&rec.image_id).ok_or_else(|| Error::UnknownImage {
            image_id: rec.image_id.clone(),
        })?;
        for l in rec.stratification_labels() {
            *counts.entry((fold.clone(), l)).or_insert(0) += 1;
        }
    }
    Ok(counts)
}

pub fn stratified_split(m: &DatasetManifest, spec: &SplitSpec) -> Result<SplitAssignment> {
    let label_sets: Vec<BTreeSet<u32>> = m.images.iter().map(|r| r.stratification_labels()).collect();
    let folds = iterative_stratify(&label_sets, &spec.fold_fractions, spec.seed)?;
    let assignment: BTreeMap<String, String> = m
        .images
        .iter()
        .zip(&folds)
        .map(|(r, &k)| (r.image_id.clone(), spec.fold_names[k].clone()))
        .collect();
    let per_label_counts = count_labels(m, &assignment)?;
    Ok(SplitAssignment {
        assignment,
        spec: spec.clone(),
        per_label_counts,
    })
}

/// Indices of a stratified `fraction` of the examples, in dataset order.
pub fn stratified_subsample_indices(
    label_sets: &[BTreeSet<u32>],
    fraction: f64,
    seed: u64,
) -> Result<Vec<usize>> {
    let n = label_sets.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("fraction {fraction} outside (0, 1]")));
    }
    if fraction == 1.0 {
        return Ok((0..n).collect());
    }
    if fraction * (n as f64) < 1.0 {
        return Err(Error::FractionTooSmall { fraction, n });
    }
    let folds = iterative_stratify(label_sets, &[fraction, 1.0 - fraction], seed)?;
    let picked: Vec<usize> = (0..n).filter(|&i| folds[i] == 0).collect();
    if picked.is_empty() {
        return Err(Error::FractionTooSmall { fraction, n });
    }
    Ok(picked)
}

/// Image ids of a stratified `fraction` of the manifest, in manifest order.
pub fn stratified_subsample(m: &DatasetManifest, fraction: f64, seed: u64) -> Result<Vec<String>> {
    let label_sets: Vec<BTreeSet<u32>> = m.images.iter().map(|r| r.stratification_labels()).collect();
    let idx = stratified_subsample_indices(&label_sets, fraction, seed)?;
    Ok(idx.into_iter().map(|i| m.images[i].image_id.clone()).collect())
}
