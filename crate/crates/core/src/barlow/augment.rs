//! Seeded view generation for grayscale images and raw vectors.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

pub const MIN_SIDE: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationSpec {
    /// Crop area as a fraction of the image area, drawn uniformly.
    pub crop_scale_range: (f64, f64),
    pub flip_probability: f64,
    pub noise_sigma: f64,
    pub brightness_jitter: f64,
    pub contrast_jitter: f64,
    pub seed: u64,
}

impl Default for AugmentationSpec {
    fn default() -> Self {
        Self {
            crop_scale_range: (0.6, 1.0),
            flip_probability: 0.5,
            noise_sigma: 0.1,
            brightness_jitter: 0.1,
            contrast_jitter: 0.1,
            seed: 0,
        }
    }
}

impl AugmentationSpec {
    /// No-op augmentation.
    pub fn identity(seed: u64) -> Self {
        Self {
            crop_scale_range: (1.0, 1.0),
            flip_probability: 0.0,
            noise_sigma: 0.0,
            brightness_jitter: 0.0,
            contrast_jitter: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.crop_scale_range;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(Error::InvalidArgument(format!("crop scale range ({lo}, {hi}) not within (0, 1]")));
        }
        if !(0.0..=1.0).contains(&self.flip_probability) {
            return Err(Error::InvalidArgument(format!("flip probability {} outside [0, 1]", self.flip_probability)));
        }
        for (name, v) in [
            ("noise sigma", self.noise_sigma),
            ("brightness jitter", self.brightness_jitter),
            ("contrast jitter", self.contrast_jitter),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

fn bilinear(img: &Array2<f64>, y: f64, x: f64) -> f64 {
    let (h, w) = img.dim();
    let y = y.clamp(0.0, (h - 1) as f64);
    let x = x.clamp(0.0, (w - 1) as f64);
    let (y0, x0) = (y.floor() as usize, x.floor() as usize);
    let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
    let (fy, fx) = (y - y0 as f64, x - x0 as f64);
    let top = img[[y0, x0]] * (1.0 - fx) + img[[y0, x1]] * fx;
    let bottom = img[[y1, x0]] * (1.0 - fx) + img[[y1, x1]] * fx;
    top * (1.0 - fy) + bottom * fy
}

/// One view. Random draws happen in a fixed order whatever the spec:
/// crop scale, crop top, crop left, flip, contrast, brightness, then one
/// normal deviate per pixel if noise is enabled.
fn view(img: &Array2<f64>, spec: &AugmentationSpec, rng: &mut SplitMix64) -> Array2<f64> {
    let (h, w) = img.dim();
    let (lo, hi) = spec.crop_scale_range;
    let side = rng.uniform(lo, hi).sqrt();
    let (ch, cw) = (h as f64 * side, w as f64 * side);
    let top = rng.uniform(0.0, h as f64 - ch);
    let left = rng.uniform(0.0, w as f64 - cw);
    let flip = rng.next_f64() < spec.flip_probability;
    let contrast = 1.0 + rng.uniform(-spec.contrast_jitter, spec.contrast_jitter);
    let brightness = rng.uniform(-spec.brightness_jitter, spec.brightness_jitter);

    let mut out = Array2::zeros((h, w));
    for i in 0..h {
        let y = top + (i as f64 + 0.5) * ch / h as f64 - 0.5;
        for j in 0..w {
            let x = left + (j as f64 + 0.5) * cw / w as f64 - 0.5;
            let jj = if flip { w - 1 - j } else { j };
            out[[i, jj]] = bilinear(img, y, x);
        }
    }
    if spec.contrast_jitter > 0.0 || spec.brightness_jitter > 0.0 {
        let mean = out.sum() / (h * w) as f64;
        out.mapv_inplace(|v| (v - mean) * contrast + mean + brightness);
    }
    if spec.noise_sigma > 0.0 {
        out.mapv_inplace(|v| v + spec.noise_sigma * rng.next_gaussian());
    }
    out.mapv_inplace(|v| v.clamp(0.0, 1.0));
    out
}

/// Two views of `image` drawn from the stream for `(spec.seed, index)`.
pub fn augment_pair(image: &Array2<f64>, spec: &AugmentationSpec, index: u64) -> Result<(Array2<f64>, Array2<f64>)> {
    let (h, w) = image.dim();
    if h < MIN_SIDE || w < MIN_SIDE {
        return Err(Error::ImageTooSmall { height: h, width: w });
    }
    spec.validate()?;
    let mut rng = SplitMix64::derived(spec.seed, index);
    let a = view(image, spec, &mut rng);
    let b = view(image, spec, &mut rng);
    Ok((a, b))
}

/// Two noisy copies of a raw feature vector; only `noise_sigma` applies.
pub fn augment_vector_pair(v: &[f64], spec: &AugmentationSpec, index: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = SplitMix64::derived(spec.seed, index);
    let mut noisy = || -> Vec<f64> {
        v.iter()
            .map(|x| if spec.noise_sigma > 0.0 { x + spec.noise_sigma * rng.next_gaussian() } else { *x })
            .collect()
    };
    let a = noisy();
    let b = noisy();
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize) -> Array2<f64> {
        Array2::from_shape_fn((h, w), |(i, j)| ((i * 7 + j * 3) % 11) as f64 / 10.0)
    }

    #[test]
    fn identity_spec_returns_input() {
        let img = ramp(9, 12);
        let (a, b) = augment_pair(&img, &AugmentationSpec::identity(4), 17).unwrap();
        assert_eq!(a, img);
        assert_eq!(b, img);
    }

    #[test]
    fn full_flip_reverses_columns() {
        let img = ramp(8, 10);
        let spec = AugmentationSpec {
            flip_probability: 1.0,
            ..AugmentationSpec::identity(1)
        };
        let (a, _) = augment_pair(&img, &spec, 0).unwrap();
        let mut reversed = img.clone();
        reversed.invert_axis(ndarray::Axis(1));
        assert_eq!(a, reversed);
        let (back, _) = augment_pair(&a, &spec, 0).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn deterministic_and_index_dependent() {
        let img = ramp(16, 16);
        let spec = AugmentationSpec { seed: 3, ..Default::default() };
        let p = augment_pair(&img, &spec, 5).unwrap();
        assert_eq!(p, augment_pair(&img, &spec, 5).unwrap());
        assert_ne!(p.0, p.1);
        assert_ne!(p, augment_pair(&img, &spec, 6).unwrap());
        assert!(p.0.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn too_small() {
        assert!(matches!(
            augment_pair(&ramp(7, 20), &AugmentationSpec::default(), 0),
            Err(Error::ImageTooSmall { height: 7, width: 20 })
        ));
    }

    #[test]
    fn invalid_spec() {
        let spec = AugmentationSpec {
            crop_scale_range: (0.9, 0.5),
            ..Default::default()
        };
        assert!(augment_pair(&ramp(8, 8), &spec, 0).is_err());
    }
}
