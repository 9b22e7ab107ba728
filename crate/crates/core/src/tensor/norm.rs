//! Per-channel batch normalization.

use super::{Param, Result, Scalar, Tensor, TensorError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormMode {
    /// Normalize with batch statistics and fold them into the running stats.
    Train { momentum: f64 },
    /// Normalize with the running stats.
    Infer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f32>,
    pub var: Vec<f32>,
}

impl RunningStats {
    pub fn new(channels: usize) -> Self {
        Self { mean: vec![0.0; channels], var: vec![1.0; channels] }
    }
}

/// Saved forward state for [`batchnorm_backward`].
#[derive(Debug, Clone)]
pub struct BatchNormCache<T> {
    x_hat: Tensor<T>,
    inv_std: Vec<f64>,
    batch_stats: bool,
}

fn to64<T: Scalar>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

fn from64<T: Scalar>(v: f64) -> T {
    T::from(v).unwrap_or_else(T::nan)
}

fn check<T: Scalar>(input: &Tensor<T>, gamma: &Param<T>, beta: &Param<T>, stats: &RunningStats, eps: f64) -> Result<()> {
    let c = input.channels();
    if gamma.value.len() != c || beta.value.len() != c || stats.mean.len() != c || stats.var.len() != c {
        return Err(TensorError::ShapeMismatch { op: "batchnorm", lhs: input.shape(), rhs: gamma.shape() });
    }
    if !(eps > 0.0) {
        return Err(TensorError::InvalidArgument { op: "batchnorm", reason: format!("eps must be > 0, got {eps}") });
    }
    Ok(())
}

pub fn batchnorm<T: Scalar>(
    input: &Tensor<T>,
    gamma: &Param<T>,
    beta: &Param<T>,
    stats: &mut RunningStats,
    mode: NormMode,
    eps: f64,
) -> Result<(Tensor<T>, BatchNormCache<T>)> {
    check(input, gamma, beta, stats, eps)?;
    let [n, c, h, w] = input.shape();
    let m = (n * h * w) as f64;
    let mut out = Tensor::try_zeros(input.shape())?;
    let mut x_hat = Tensor::try_zeros(input.shape())?;
    let mut inv_std = vec![0.0; c];

    for ch in 0..c {
        let (mean, var) = match mode {
            NormMode::Infer => (stats.mean[ch] as f64, stats.var[ch] as f64),
            NormMode::Train { momentum } => {
                let mut sum = 0.0;
                for ni in 0..n {
                    sum += input.plane(ni, ch).iter().map(|&v| to64(v)).sum::<f64>();
                }
                let mean = sum / m;
                let mut sq = 0.0;
                for ni in 0..n {
                    sq += input.plane(ni, ch).iter().map(|&v| (to64(v) - mean).powi(2)).sum::<f64>();
                }
                let var = sq / m;
                let unbiased = if m > 1.0 { sq / (m - 1.0) } else { var };
                stats.mean[ch] = ((1.0 - momentum) * stats.mean[ch] as f64 + momentum * mean) as f32;
                stats.var[ch] = ((1.0 - momentum) * stats.var[ch] as f64 + momentum * unbiased) as f32;
                (mean, var)
            }
        };
        let istd = 1.0 / (var + eps).sqrt();
        inv_std[ch] = istd;
        // scale/shift derived exactly as in batchnorm_infer_inplace so both paths agree bitwise
        let g = to64(gamma.value.data()[ch]);
        let b = to64(beta.value.data()[ch]);
        let (scale, shift) = (g * istd, b - mean * g * istd);
        let (mean_t, istd_t): (T, T) = (from64(mean), from64(istd));
        let (scale_t, shift_t): (T, T) = (from64(scale), from64(shift));
        for ni in 0..n {
            let src = input.plane(ni, ch);
            for (xh, &x) in x_hat.plane_mut(ni, ch).iter_mut().zip(src) {
                *xh = (x - mean_t) * istd_t;
            }
            for (o, &x) in out.plane_mut(ni, ch).iter_mut().zip(src) {
                *o = x * scale_t + shift_t;
            }
        }
    }
    let batch_stats = matches!(mode, NormMode::Train { .. });
    Ok((out, BatchNormCache { x_hat, inv_std, batch_stats }))
}

/// Inference-mode normalization applied in place; no cache is kept.
pub fn batchnorm_infer_inplace<T: Scalar>(
    x: &mut Tensor<T>,
    gamma: &Param<T>,
    beta: &Param<T>,
    stats: &RunningStats,
    eps: f64,
) -> Result<()> {
    check(x, gamma, beta, stats, eps)?;
    let [n, c, _, _] = x.shape();
    for ch in 0..c {
        let istd = 1.0 / (stats.var[ch] as f64 + eps).sqrt();
        let g = to64(gamma.value.data()[ch]);
        let b = to64(beta.value.data()[ch]);
        let scale: T = from64(g * istd);
        let shift: T = from64(b - stats.mean[ch] as f64 * g * istd);
        for ni in 0..n {
            for v in x.plane_mut(ni, ch) {
                *v = *v * scale + shift;
            }
        }
    }
    Ok(())
}

/// Accumulates gamma/beta gradients and returns the input gradient.
pub fn batchnorm_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    cache: &BatchNormCache<T>,
    gamma: &mut Param<T>,
    beta: &mut Param<T>,
) -> Result<Tensor<T>> {
    if grad_out.shape() != cache.x_hat.shape() {
        return Err(TensorError::ShapeMismatch {
            op: "batchnorm_backward",
            lhs: grad_out.shape(),
            rhs: cache.x_hat.shape(),
        });
    }
    let [n, c, h, w] = grad_out.shape();
    let m = (n * h * w) as f64;
    let mut grad_in = Tensor::try_zeros(grad_out.shape())?;
    let mut dgamma = vec![T::zero(); c];
    let mut dbeta = vec![T::zero(); c];
    for ch in 0..c {
        let mut sum_dy = 0.0;
        let mut sum_dy_xh = 0.0;
        for ni in 0..n {
            for (&dy, &xh) in grad_out.plane(ni, ch).iter().zip(cache.x_hat.plane(ni, ch)) {
                sum_dy += to64(dy);
                sum_dy_xh += to64(dy) * to64(xh);
            }
        }
        dgamma[ch] = from64(sum_dy_xh);
        dbeta[ch] = from64(sum_dy);
        let g = to64(gamma.value.data()[ch]);
        let istd = cache.inv_std[ch];
        for ni in 0..n {
            let dys = grad_out.plane(ni, ch);
            let xhs = cache.x_hat.plane(ni, ch);
            let dst = grad_in.plane_mut(ni, ch);
            if cache.batch_stats {
                let k = g * istd / m;
                for ((d, &dy), &xh) in dst.iter_mut().zip(dys).zip(xhs) {
                    *d = from64(k * (m * to64(dy) - sum_dy - to64(xh) * sum_dy_xh));
                }
            } else {
                let k: T = from64(g * istd);
                for (d, &dy) in dst.iter_mut().zip(dys) {
                    *d = dy * k;
                }
            }
        }
    }
    gamma.accumulate(&dgamma);
    beta.accumulate(&dbeta);
    Ok(grad_in)
}
