//! Image-level bootstrap resampling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

pub const MIN_RESAMPLES: usize = 100;

/// Indices of bootstrap replicate `replicate` over `n` items. Replicate `i`
/// draws from a generator seeded with `seed + i`.
pub fn resample_indices(n: usize, seed: u64, replicate: usize) -> Vec<usize> {
    let mut rng = SplitMix64::new(seed.wrapping_add(replicate as u64));
    (0..n).map(|_| rng.below(n)).collect()
}

/// Evaluate `f` on each of `resamples` replicates. Replicates run on the
/// current rayon pool; results come back in replicate order.
pub fn bootstrap_replicates<T, F>(n: usize, resamples: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&[usize]) -> T + Sync,
{
    if resamples < MIN_RESAMPLES {
        return Err(Error::InvalidArgument(format!(
            "bootstrap needs at least {MIN_RESAMPLES} resamples, got {resamples}"
        )));
    }
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok((0..resamples)
        .into_par_iter()
        .map(|i| f(&resample_indices(n, seed, i)))
        .collect())
}

/// Percentile of sorted data with linear interpolation between order
/// statistics at rank `(m - 1) * p`.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub n_valid: usize,
    pub n_undefined: usize,
}

/// Two-sided percentile interval at `level` over the defined replicate
/// values.
pub fn percentile_interval(values: &[Option<f64>], level: f64) -> Result<Interval> {
    let mut defined: Vec<f64> = values.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(Error::AllResamplesUndefined);
    }
    defined.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Ok(Interval {
        lo: percentile(&defined, alpha),
        hi: percentile(&defined, 1.0 - alpha),
        n_valid: defined.len(),
        n_undefined: values.len() - defined.len(),
    })
}

/// 95% percentile bootstrap interval of `metric` over `n` items.
pub fn bootstrap_ci<F>(n: usize, resamples: usize, seed: u64, metric: F) -> Result<Interval>
where
    F: Fn(&[usize]) -> Option<f64> + Sync,
{
    let values = bootstrap_replicates(n, resamples, seed, metric)?;
    percentile_interval(&values, 0.95)
}

/// Mean and min-max band of repeated trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialBand {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

pub fn trial_band(values: &[f64]) -> Result<TrialBand> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("no trial values".into()));
    }
    Ok(TrialBand {
        mean: values.iter().sum::<f64>() / values.len() as f64,
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        n: values.len(),
    })
}
