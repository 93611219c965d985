//! Cross-correlation objective between two batches of embeddings.
//!
//! Each column of `za` and `zb` (N x D) is standardized with its population
//! standard deviation: `x = z - mean`, `sigma = sqrt(sum x^2 / N)`,
//! `s = sigma + eps`, `zhat = x / s`. Then `C = zhat_a^T zhat_b / N` and
//!
//! ```text
//! L = sum_i (1 - C_ii)^2 + lambda * sum_{i != j} C_ij^2
//! ```
//!
//! # Gradient
//!
//! With `G = dL/dC` (`G_ii = -2 (1 - C_ii)`, `G_ij = 2 lambda C_ij`):
//!
//! ```text
//! dL/dzhat_a = zhat_b G^T / N        dL/dzhat_b = zhat_a G / N
//! ```
//!
//! For one column with upstream gradient `g = dL/dzhat`, using
//! `d sigma / d z_m = x_m / (N sigma)` and `sum_m x_m = 0`:
//!
//! ```text
//! dL/dz_m = (g_m - mean(g)) / s  -  (sum_n g_n x_n) / s^2 * x_m / (N sigma)
//! ```
//!
//! The second term vanishes for a constant column (`sigma = 0`, all `x = 0`).

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_LAMBDA: f64 = 5e-3;
pub const DEFAULT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCorrelation {
    pub c: Array2<f64>,
    pub lambda: f64,
    pub loss_diag: f64,
    pub loss_offdiag: f64,
    pub loss_total: f64,
}

impl CrossCorrelation {
    pub fn dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn mean_abs_diag_error(&self) -> f64 {
        let d = self.dim();
        (0..d).map(|i| (self.c[[i, i]] - 1.0).abs()).sum::<f64>() / d as f64
    }

    pub fn mean_abs_offdiag(&self) -> f64 {
        let d = self.dim();
        if d < 2 {
            return 0.0;
        }
        let mut sum = 0.0;
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    sum += self.c[[i, j]].abs();
                }
            }
        }
        sum / (d * (d - 1)) as f64
    }
}

fn check(za: &Array2<f64>, zb: &Array2<f64>) -> Result<()> {
    if za.dim() != zb.dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", za.dim()),
            found: format!("{:?}", zb.dim()),
        });
    }
    if za.nrows() < 2 || za.ncols() == 0 {
        return Err(Error::ShapeMismatch {
            expected: "at least 2 rows and 1 column".into(),
            found: format!("{:?}", za.dim()),
        });
    }
    if za.iter().chain(zb.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite embedding entry".into()));
    }
    Ok(())
}

struct Standardized {
    centred: Array2<f64>,
    zhat: Array2<f64>,
    sigma: Vec<f64>,
    s: Vec<f64>,
}

fn standardize(z: &Array2<f64>, eps: f64) -> Standardized {
    let (n, d) = z.dim();
    let mut centred = z.clone();
    let mut zhat = Array2::zeros((n, d));
    let mut sigma = vec![0.0; d];
    let mut s = vec![0.0; d];
    for j in 0..d {
        let mut mean = 0.0;
        for i in 0..n {
            mean += z[[i, j]];
        }
        mean /= n as f64;
        let mut ss = 0.0;
        for i in 0..n {
            let x = z[[i, j]] - mean;
            centred[[i, j]] = x;
            ss += x * x;
        }
        sigma[j] = (ss / n as f64).sqrt();
        s[j] = sigma[j] + eps;
        for i in 0..n {
            zhat[[i, j]] = centred[[i, j]] / s[j];
        }
    }
    Standardized { centred, zhat, sigma, s }
}

/// `a^T b / n`, accumulated row by row so that every entry sums its terms
/// in row order.
fn correlate(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (n, d) = a.dim();
    let (a, b) = (a.as_standard_layout(), b.as_standard_layout());
    let (a, b) = (a.as_slice().expect("standard layout"), b.as_slice().expect("standard layout"));
    let mut c = vec![0.0; d * d];
    for (ra, rb) in a.chunks_exact(d).zip(b.chunks_exact(d)) {
        for (&x, row) in ra.iter().zip(c.chunks_exact_mut(d)) {
            for (acc, &y) in row.iter_mut().zip(rb) {
                *acc += x * y;
            }
        }
    }
    c.iter_mut().for_each(|v| *v /= n as f64);
    Array2::from_shape_vec((d, d), c).expect("d x d")
}

fn losses(c: Array2<f64>, lambda: f64) -> CrossCorrelation {
    let d = c.nrows();
    let (mut diag, mut off) = (0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            if i == j {
                diag += (1.0 - c[[i, i]]).powi(2);
            } else {
                off += c[[i, j]] * c[[i, j]];
            }
        }
    }
    CrossCorrelation {
        c,
        lambda,
        loss_diag: diag,
        loss_offdiag: off,
        loss_total: diag + lambda * off,
    }
}

/// `C` alone.
pub fn cross_correlation(za: &Array2<f64>, zb: &Array2<f64>, eps: f64) -> Result<Array2<f64>> {
    check(za, zb)?;
    Ok(correlate(&standardize(za, eps).zhat, &standardize(zb, eps).zhat))
}

pub fn bt_loss(za: &Array2<f64>, zb: &Array2<f64>, lambda: f64, eps: f64) -> Result<CrossCorrelation> {
    Ok(losses(cross_correlation(za, zb, eps)?, lambda))
}

fn backprop_standardize(g: &Array2<f64>, st: &Standardized) -> Array2<f64> {
    let (n, d) = g.dim();
    let mut out = Array2::zeros((n, d));
    for j in 0..d {
        let (mut gmean, mut gx) = (0.0, 0.0);
        for i in 0..n {
            gmean += g[[i, j]];
            gx += g[[i, j]] * st.centred[[i, j]];
        }
        gmean /= n as f64;
        let s = st.s[j];
        let scale = if st.sigma[j] > 0.0 {
            gx / (s * s * n as f64 * st.sigma[j])
        } else {
            0.0
        };
        for i in 0..n {
            out[[i, j]] = (g[[i, j]] - gmean) / s - scale * st.centred[[i, j]];
        }
    }
    out
}

/// Loss together with `(dL/dza, dL/dzb)`.
pub fn bt_loss_and_gradient(
    za: &Array2<f64>,
    zb: &Array2<f64>,
    lambda: f64,
    eps: f64,
) -> Result<(CrossCorrelation, Array2<f64>, Array2<f64>)> {
    check(za, zb)?;
    let (n, d) = za.dim();
    let sa = standardize(za, eps);
    let sb = standardize(zb, eps);
    let cc = losses(correlate(&sa.zhat, &sb.zhat), lambda);

    let mut g = Array2::zeros((d, d));
    for p in 0..d {
        for q in 0..d {
            g[[p, q]] = if p == q {
                -2.0 * (1.0 - cc.c[[p, p]])
            } else {
                2.0 * lambda * cc.c[[p, q]]
            };
        }
    }
    let mut ga = Array2::zeros((n, d));
    let mut gb = Array2::zeros((n, d));
    for i in 0..n {
        for p in 0..d {
            let (mut acc_a, mut acc_b) = (0.0, 0.0);
            for q in 0..d {
                acc_a += sb.zhat[[i, q]] * g[[p, q]];
                acc_b += sa.zhat[[i, q]] * g[[q, p]];
            }
            ga[[i, p]] = acc_a / n as f64;
            gb[[i, p]] = acc_b / n as f64;
        }
    }
    Ok((cc, backprop_standardize(&ga, &sa), backprop_standardize(&gb, &sb)))
}

pub fn bt_loss_gradient(
    za: &Array2<f64>,
    zb: &Array2<f64>,
    lambda: f64,
    eps: f64,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let (_, ga, gb) = bt_loss_and_gradient(za, zb, lambda, eps)?;
    Ok((ga, gb))
}
