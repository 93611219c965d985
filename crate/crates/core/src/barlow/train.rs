//! Desk-scale trainer: a small dense encoder fitted by full-batch gradient
//! descent on the cross-correlation objective.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::augment::{augment_pair, augment_vector_pair, AugmentationSpec};
use super::data::SampleSet;
use super::loss::{bt_loss, bt_loss_and_gradient, CrossCorrelation, DEFAULT_EPS, DEFAULT_LAMBDA};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// out x in
    pub w: Array2<f64>,
    pub b: Vec<f64>,
}

/// Dense layers with `tanh` between consecutive layers and a linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub layers: Vec<Layer>,
}

impl Encoder {
    /// `dims` lists every width including the input, e.g. `[16, 8]`.
    /// Weights are N(0, 1) / sqrt(fan_in), biases zero.
    pub fn new(dims: &[usize], seed: u64) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "encoder needs at least two positive widths, got {dims:?}"
            )));
        }
        let mut rng = SplitMix64::new(seed);
        let layers = dims
            .windows(2)
            .map(|p| {
                let scale = 1.0 / (p[0] as f64).sqrt();
                Layer {
                    w: Array2::from_shape_simple_fn((p[1], p[0]), || rng.uniform(-scale, scale)),
                    b: vec![0.0; p[1]],
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.w.nrows())
    }

    /// Activations of every layer; element 0 is the input.
    fn forward_all(&self, x: &Array2<f64>) -> Vec<Array2<f64>> {
        let mut acts = vec![x.clone()];
        for (k, layer) in self.layers.iter().enumerate() {
            let inp = acts.last().expect("input present");
            let mut out = affine(inp, layer);
            if k + 1 < self.layers.len() {
                out.mapv_inplace(f64::tanh);
            }
            acts.push(out);
        }
        acts
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        self.forward_all(x).pop().expect("at least one layer")
    }

    /// Parameter gradients for upstream gradient `grad_out` on the output.
    fn backward(&self, acts: &[Array2<f64>], grad_out: Array2<f64>) -> Vec<Layer> {
        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        let mut g = grad_out;
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let inp = &acts[k];
            let (n, out_dim) = g.dim();
            let in_dim = inp.ncols();
            let mut gw = Array2::zeros((out_dim, in_dim));
            let mut gb = vec![0.0; out_dim];
            for o in 0..out_dim {
                for i in 0..n {
                    gb[o] += g[[i, o]];
                }
                for c in 0..in_dim {
                    let mut acc = 0.0;
                    for i in 0..n {
                        acc += g[[i, o]] * inp[[i, c]];
                    }
                    gw[[o, c]] = acc;
                }
            }
            if k > 0 {
                let mut gin = Array2::zeros((n, in_dim));
                for i in 0..n {
                    for c in 0..in_dim {
                        let mut acc = 0.0;
                        for o in 0..out_dim {
                            acc += g[[i, o]] * layer.w[[o, c]];
                        }
                        // through the tanh that produced this input
                        let h = inp[[i, c]];
                        gin[[i, c]] = acc * (1.0 - h * h);
                    }
                }
                g = gin;
            }
            grads.push(Layer { w: gw, b: gb });
        }
        grads.reverse();
        grads
    }

    /// Objective on a pair of view batches and its gradient with respect
    /// to every layer's parameters.
    pub fn objective_gradient(
        &self,
        va: &Array2<f64>,
        vb: &Array2<f64>,
        lambda: f64,
        eps: f64,
    ) -> Result<(CrossCorrelation, Vec<Layer>)> {
        let acts_a = self.forward_all(va);
        let acts_b = self.forward_all(vb);
        let za = acts_a.last().expect("output");
        let zb = acts_b.last().expect("output");
        let (cc, ga, gb) = bt_loss_and_gradient(za, zb, lambda, eps)?;
        let mut grads = self.backward(&acts_a, ga);
        for (g, h) in grads.iter_mut().zip(self.backward(&acts_b, gb)) {
            g.w += &h.w;
            for (x, y) in g.b.iter_mut().zip(&h.b) {
                *x += y;
            }
        }
        Ok((cc, grads))
    }

    fn step(&mut self, grads: &[Layer], lr: f64) {
        for (layer, g) in self.layers.iter_mut().zip(grads) {
            for (w, x) in layer.w.iter_mut().zip(g.w.iter()) {
                *w -= lr * x;
            }
            for (w, x) in layer.b.iter_mut().zip(&g.b) {
                *w -= lr * x;
            }
        }
    }

    /// All parameters, layer by layer, weights (row-major) before biases.
    pub fn flat_params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.w.iter().copied().chain(l.b.iter().copied()))
            .collect()
    }

    /// Inverse of [`Encoder::flat_params`] for an encoder of the same shape.
    pub fn set_flat_params(&mut self, params: &[f64]) {
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            for w in l.w.iter_mut() {
                *w = it.next().expect("enough parameters");
            }
            for b in &mut l.b {
                *b = it.next().expect("enough parameters");
            }
        }
    }
}

fn affine(x: &Array2<f64>, layer: &Layer) -> Array2<f64> {
    let (n, in_dim) = x.dim();
    let out_dim = layer.w.nrows();
    let mut out = Array2::zeros((n, out_dim));
    for i in 0..n {
        for o in 0..out_dim {
            let mut acc = layer.b[o];
            for c in 0..in_dim {
                acc += x[[i, c]] * layer.w[[o, c]];
            }
            out[[i, o]] = acc;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dims: Vec<usize>,
    pub lambda: f64,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub eps: f64,
    pub augment: AugmentationSpec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dims: vec![16, 8],
            lambda: DEFAULT_LAMBDA,
            lr: 0.05,
            epochs: 500,
            seed: 1,
            eps: DEFAULT_EPS,
            augment: AugmentationSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss_total: f64,
    pub loss_diag: f64,
    pub loss_offdiag: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    /// Loss measured before each epoch's update.
    pub epochs: Vec<EpochRecord>,
    /// Correlation of the encoder after the last update.
    pub final_cc: CrossCorrelation,
    pub encoder: Encoder,
}

impl TrainTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,loss_total,loss_diag,loss_offdiag\n");
        for r in &self.epochs {
            s.push_str(&format!("{},{},{},{}\n", r.epoch, r.loss_total, r.loss_diag, r.loss_offdiag));
        }
        s
    }
}

/// Draw the two views of every sample once. Rows with height 1 are raw
/// vectors and only receive additive noise.
pub fn make_views(data: &SampleSet, spec: &AugmentationSpec) -> Result<(Array2<f64>, Array2<f64>)> {
    let d = data.h * data.w;
    let mut va = Array2::zeros((data.n, d));
    let mut vb = Array2::zeros((data.n, d));
    for i in 0..data.n {
        let (a, b) = if data.h == 1 {
            augment_vector_pair(data.sample(i), spec, i as u64)
        } else {
            let img = data.image(i);
            let (a, b) = augment_pair(&img, spec, i as u64)?;
            (a.into_iter().collect(), b.into_iter().collect())
        };
        for k in 0..d {
            va[[i, k]] = a[k];
            vb[[i, k]] = b[k];
        }
    }
    Ok((va, vb))
}

pub fn bt_train_toy(data: &SampleSet, cfg: &TrainConfig) -> Result<TrainTrace> {
    if data.n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 samples, got {}", data.n)));
    }
    if !(cfg.lr > 0.0 && cfg.lambda >= 0.0) {
        return Err(Error::InvalidArgument("lr must be > 0 and lambda >= 0".into()));
    }
    let mut encoder = Encoder::new(&cfg.dims, cfg.seed)?;
    if encoder.input_dim() != data.h * data.w {
        return Err(Error::ShapeMismatch {
            expected: format!("input width {}", encoder.input_dim()),
            found: format!("{} values per sample", data.h * data.w),
        });
    }
    let (va, vb) = make_views(data, &cfg.augment)?;
    let mut epochs = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (cc, grads) = encoder.objective_gradient(&va, &vb, cfg.lambda, cfg.eps)?;
        if !cc.loss_total.is_finite() {
            return Err(Error::DivergenceDetected { epoch });
        }
        epochs.push(EpochRecord {
            epoch,
            loss_total: cc.loss_total,
            loss_diag: cc.loss_diag,
            loss_offdiag: cc.loss_offdiag,
        });
        encoder.step(&grads, cfg.lr);
        if encoder.layers.iter().any(|l| l.w.iter().any(|v| !v.is_finite())) {
            return Err(Error::DivergenceDetected { epoch });
        }
    }
    let final_cc = bt_loss(&encoder.forward(&va), &encoder.forward(&vb), cfg.lambda, cfg.eps)?;
    if !final_cc.loss_total.is_finite() {
        return Err(Error::DivergenceDetected { epoch: cfg.epochs });
    }
    Ok(TrainTrace { epochs, final_cc, encoder })
}
