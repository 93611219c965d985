//! Synthetic data for the toy trainer.

use ndarray::Array2;

use super::augment::AugmentationSpec;
use super::data::SampleSet;
use super::train::TrainConfig;
use crate::rng::SplitMix64;

/// `n` vectors of `width` columns built from `latent` factors that are
/// centred, mutually orthogonal and of unit population variance across the
/// sample. Column `c` holds factor `c % latent`, so every column past the
/// first `latent` duplicates an earlier one.
pub fn redundant_vectors(n: usize, latent: usize, width: usize, seed: u64) -> SampleSet {
    let mut rng = SplitMix64::new(seed);
    let mut f = Array2::from_shape_simple_fn((n, latent), || rng.next_gaussian());
    for k in 0..latent {
        let mean = f.column(k).sum() / n as f64;
        f.column_mut(k).mapv_inplace(|v| v - mean);
        for p in 0..k {
            let dot: f64 = (0..n).map(|i| f[[i, k]] * f[[i, p]]).sum();
            let norm: f64 = (0..n).map(|i| f[[i, p]] * f[[i, p]]).sum();
            for i in 0..n {
                f[[i, k]] -= dot / norm * f[[i, p]];
            }
        }
        let sd = ((0..n).map(|i| f[[i, k]] * f[[i, k]]).sum::<f64>() / n as f64).sqrt();
        f.column_mut(k).mapv_inplace(|v| v / sd);
    }
    let values = (0..n)
        .flat_map(|i| (0..width).map(move |c| (i, c % latent)))
        .map(|(i, k)| f[[i, k]])
        .collect();
    SampleSet::new(n, 1, width, values).expect("shape is consistent")
}

pub const TOY_SEED: u64 = 20240601;

/// The shipped toy problem: 256 vectors of width 16 (8 factors, each twice).
pub fn toy_dataset() -> SampleSet {
    redundant_vectors(256, 8, 16, TOY_SEED)
}

/// Training settings for [`toy_dataset`].
pub fn toy_config() -> TrainConfig {
    TrainConfig {
        dims: vec![16, 8],
        lambda: 5e-3,
        lr: 0.05,
        epochs: 500,
        seed: 1,
        augment: AugmentationSpec {
            noise_sigma: 0.1,
            seed: 1,
            ..AugmentationSpec::identity(1)
        },
        ..TrainConfig::default()
    }
}
