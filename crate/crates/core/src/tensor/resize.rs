//! Bilinear resampling with the half-pixel-center convention (align_corners = false).

use super::{Result, Scalar, Tensor, TensorError};

/// Source taps for one output coordinate: `lo`, `hi` and the weight of `hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub lo: usize,
    pub hi: usize,
    pub frac: f64,
}

/// Per-axis taps mapping `out_len` samples onto `in_len` source samples.
pub fn bilinear_taps(in_len: usize, out_len: usize) -> Vec<Tap> {
    let scale = in_len as f64 / out_len as f64;
    (0..out_len)
        .map(|i| {
            let src = ((i as f64 + 0.5) * scale - 0.5).max(0.0);
            let lo = (src.floor() as usize).min(in_len - 1);
            let hi = (lo + 1).min(in_len - 1);
            let frac = if lo == hi { 0.0 } else { src - lo as f64 };
            Tap { lo, hi, frac }
        })
        .collect()
}

/// Interpolates between `a` and `b` as `a + t (b - a)`: exact when `a == b`.
#[inline]
fn lerp<T: Scalar>(a: T, b: T, t: T) -> T {
    a + t * (b - a)
}

fn check_dims(op: &'static str, out_h: usize, out_w: usize) -> Result<()> {
    if out_h == 0 || out_w == 0 {
        return Err(TensorError::InvalidArgument { op, reason: format!("output dims must be >= 1, got {out_h}x{out_w}") });
    }
    Ok(())
}

pub fn bilinear_resize<T: Scalar>(input: &Tensor<T>, out_h: usize, out_w: usize) -> Result<Tensor<T>> {
    check_dims("bilinear_resize", out_h, out_w)?;
    let [n, c, h, w] = input.shape();
    let ty = bilinear_taps(h, out_h);
    let tx = bilinear_taps(w, out_w);
    let fx: Vec<T> = tx.iter().map(|t| T::from(t.frac).unwrap()).collect();
    let mut out = Tensor::try_zeros([n, c, out_h, out_w])?;
    let mut top = vec![T::zero(); out_w];
    let mut bot = vec![T::zero(); out_w];
    for ni in 0..n {
        for ci in 0..c {
            let src = input.plane(ni, ci);
            let dst = out.plane_mut(ni, ci);
            for (oy, tap) in ty.iter().enumerate() {
                let r0 = &src[tap.lo * w..(tap.lo + 1) * w];
                let r1 = &src[tap.hi * w..(tap.hi + 1) * w];
                for (ox, t) in tx.iter().enumerate() {
                    top[ox] = lerp(r0[t.lo], r0[t.hi], fx[ox]);
                    bot[ox] = lerp(r1[t.lo], r1[t.hi], fx[ox]);
                }
                let fy = T::from(tap.frac).unwrap();
                for (ox, d) in dst[oy * out_w..(oy + 1) * out_w].iter_mut().enumerate() {
                    *d = lerp(top[ox], bot[ox], fy);
                }
            }
        }
    }
    Ok(out)
}

/// Adjoint of [`bilinear_resize`]: scatters `grad_out` back onto an input of
/// spatial size `in_h` x `in_w`.
pub fn bilinear_resize_backward<T: Scalar>(grad_out: &Tensor<T>, in_h: usize, in_w: usize) -> Result<Tensor<T>> {
    check_dims("bilinear_resize_backward", in_h, in_w)?;
    let [n, c, out_h, out_w] = grad_out.shape();
    let ty = bilinear_taps(in_h, out_h);
    let tx = bilinear_taps(in_w, out_w);
    let mut grad_in = Tensor::try_zeros([n, c, in_h, in_w])?;
    for ni in 0..n {
        for ci in 0..c {
            let g = grad_out.plane(ni, ci);
            let dst = grad_in.plane_mut(ni, ci);
            for (oy, ty) in ty.iter().enumerate() {
                let fy = T::from(ty.frac).unwrap();
                for (ox, tx) in tx.iter().enumerate() {
                    let fx = T::from(tx.frac).unwrap();
                    let v = g[oy * out_w + ox];
                    let (top, bot) = (v * (T::one() - fy), v * fy);
                    dst[ty.lo * in_w + tx.lo] = dst[ty.lo * in_w + tx.lo] + top * (T::one() - fx);
                    dst[ty.lo * in_w + tx.hi] = dst[ty.lo * in_w + tx.hi] + top * fx;
                    dst[ty.hi * in_w + tx.lo] = dst[ty.hi * in_w + tx.lo] + bot * (T::one() - fx);
                    dst[ty.hi * in_w + tx.hi] = dst[ty.hi * in_w + tx.hi] + bot * fx;
                }
            }
        }
    }
    Ok(grad_in)
}
