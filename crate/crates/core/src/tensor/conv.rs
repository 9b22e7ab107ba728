//! Grouped 2-d cross-correlation with zero padding, lowered to GEMM via im2col.
//!
//! The im2col buffer is built for a band of output rows at a time so scratch
//! memory stays bounded regardless of image size.

use serde::{Deserialize, Serialize};

use super::{Param, Result, Scalar, Tensor, TensorError};

/// Upper bound on im2col scratch, in elements.
const COL_BUDGET: usize = 1 << 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvConfig {
    pub stride: usize,
    pub padding: usize,
    pub groups: usize,
}

impl ConvConfig {
    pub const fn new(stride: usize, padding: usize, groups: usize) -> Self {
        Self { stride, padding, groups }
    }
}

impl Default for ConvConfig {
    fn default() -> Self {
        Self::new(1, 0, 1)
    }
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    n: usize,
    h: usize,
    w: usize,
    cin_g: usize,
    cout: usize,
    cout_g: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
    stride: usize,
    pad: usize,
    groups: usize,
}

impl Geometry {
    fn k(&self) -> usize {
        self.cin_g * self.kh * self.kw
    }

    fn pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.pad == 0
    }

    fn rows_per_chunk(&self) -> usize {
        (COL_BUDGET / (self.k() * self.ow).max(1)).clamp(1, self.oh)
    }
}

fn geometry(input: [usize; 4], weight: [usize; 4], cfg: ConvConfig) -> Result<Geometry> {
    let [n, cin, h, w] = input;
    let [cout, cin_g, kh, kw] = weight;
    if cfg.stride == 0 || cfg.groups == 0 {
        return Err(TensorError::InvalidArgument {
            op: "conv2d",
            reason: format!("stride and groups must be >= 1, got {cfg:?}"),
        });
    }
    let g = cfg.groups;
    if cin % g != 0 || cout % g != 0 || cin / g != cin_g {
        return Err(TensorError::ShapeMismatch { op: "conv2d", lhs: input, rhs: weight });
    }
    if h + 2 * cfg.padding < kh || w + 2 * cfg.padding < kw {
        return Err(TensorError::ShapeMismatch { op: "conv2d", lhs: input, rhs: weight });
    }
    let oh = (h + 2 * cfg.padding - kh) / cfg.stride + 1;
    let ow = (w + 2 * cfg.padding - kw) / cfg.stride + 1;
    Ok(Geometry {
        n,
        h,
        w,
        cin_g,
        cout,
        cout_g: cout / g,
        kh,
        kw,
        oh,
        ow,
        stride: cfg.stride,
        pad: cfg.padding,
        groups: g,
    })
}

/// Fills `col` (K rows × `rows*ow` columns) for output rows `y0..y0+rows`.
/// `img` holds the `cin_g` input planes of one group.
fn im2col<T: Scalar>(g: &Geometry, img: &[T], y0: usize, rows: usize, col: &mut [T]) {
    let n_cols = rows * g.ow;
    let plane = g.h * g.w;
    let mut k = 0;
    for ci in 0..g.cin_g {
        let src = &img[ci * plane..(ci + 1) * plane];
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let dst = &mut col[k * n_cols..(k + 1) * n_cols];
                for (r, oy) in (y0..y0 + rows).enumerate() {
                    let drow = &mut dst[r * g.ow..(r + 1) * g.ow];
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        drow.fill(T::zero());
                        continue;
                    }
                    let srow = &src[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (ox, d) in drow.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        *d = if ix < 0 || ix >= g.w as isize { T::zero() } else { srow[ix as usize] };
                    }
                }
                k += 1;
            }
        }
    }
}

/// Scatter-adds `col` back into the group's input planes (adjoint of [`im2col`]).
fn col2im<T: Scalar>(g: &Geometry, col: &[T], y0: usize, rows: usize, img: &mut [T]) {
    let n_cols = rows * g.ow;
    let plane = g.h * g.w;
    let mut k = 0;
    for ci in 0..g.cin_g {
        let dst = &mut img[ci * plane..(ci + 1) * plane];
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let src = &col[k * n_cols..(k + 1) * n_cols];
                for (r, oy) in (y0..y0 + rows).enumerate() {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let drow = &mut dst[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (ox, &s) in src[r * g.ow..(r + 1) * g.ow].iter().enumerate() {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        if ix >= 0 && ix < g.w as isize {
                            drow[ix as usize] = drow[ix as usize] + s;
                        }
                    }
                }
                k += 1;
            }
        }
    }
}

/// 2-d cross-correlation. `weight` is (out_ch, in_ch / groups, kh, kw).
pub fn conv2d<T: Scalar>(
    input: &Tensor<T>,
    weight: &Param<T>,
    bias: Option<&Param<T>>,
    cfg: ConvConfig,
) -> Result<Tensor<T>> {
    let g = geometry(input.shape(), weight.shape(), cfg)?;
    if let Some(b) = bias {
        if b.value.len() != g.cout {
            return Err(TensorError::ShapeMismatch { op: "conv2d bias", lhs: weight.shape(), rhs: b.shape() });
        }
    }
    let mut out = Tensor::try_zeros([g.n, g.cout, g.oh, g.ow])?;
    let k = g.k();
    let in_plane = g.h * g.w;
    let out_plane = g.oh * g.ow;
    let w = weight.value.data();
    let rows_per_chunk = g.rows_per_chunk();
    let mut col = if g.pointwise() { Vec::new() } else { vec![T::zero(); k * rows_per_chunk * g.ow] };

    for ni in 0..g.n {
        for gi in 0..g.groups {
            let img = &input.image(ni)[gi * g.cin_g * in_plane..(gi + 1) * g.cin_g * in_plane];
            let wg = &w[gi * g.cout_g * k..(gi + 1) * g.cout_g * k];
            let out_img = out.image_mut(ni);
            let out_g = &mut out_img[gi * g.cout_g * out_plane..(gi + 1) * g.cout_g * out_plane];
            if g.pointwise() {
                // SAFETY: wg is cout_g×k, img is k×plane, out_g is cout_g×plane, all row-major.
                unsafe {
                    T::gemm(
                        g.cout_g, k, out_plane, T::one(),
                        wg.as_ptr(), k as isize, 1,
                        img.as_ptr(), in_plane as isize, 1,
                        T::zero(),
                        out_g.as_mut_ptr(), out_plane as isize, 1,
                    );
                }
                continue;
            }
            let mut y0 = 0;
            while y0 < g.oh {
                let rows = rows_per_chunk.min(g.oh - y0);
                let n_cols = rows * g.ow;
                im2col(&g, img, y0, rows, &mut col[..k * n_cols]);
                // SAFETY: col is k×n_cols; the output band starts at row y0 of each
                // plane and spans n_cols contiguous elements per channel.
                unsafe {
                    T::gemm(
                        g.cout_g, k, n_cols, T::one(),
                        wg.as_ptr(), k as isize, 1,
                        col.as_ptr(), n_cols as isize, 1,
                        T::zero(),
                        out_g.as_mut_ptr().add(y0 * g.ow), out_plane as isize, 1,
                    );
                }
                y0 += rows;
            }
        }
    }

    if let Some(b) = bias {
        let bv = b.value.data();
        for ni in 0..g.n {
            for (c, &bc) in bv.iter().enumerate() {
                for v in out.plane_mut(ni, c) {
                    *v = *v + bc;
                }
            }
        }
    }
    Ok(out)
}

/// Backward pass of [`conv2d`]: accumulates weight/bias gradients and returns
/// the gradient with respect to `input`.
pub fn conv2d_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    input: &Tensor<T>,
    weight: &mut Param<T>,
    bias: Option<&mut Param<T>>,
    cfg: ConvConfig,
) -> Result<Tensor<T>> {
    backward_impl(grad_out, input, weight, bias, cfg, true).map(|g| g.expect("input grad requested"))
}

/// Parameter-only backward pass: skips the input gradient.
pub fn conv2d_backward_params<T: Scalar>(
    grad_out: &Tensor<T>,
    input: &Tensor<T>,
    weight: &mut Param<T>,
    bias: Option<&mut Param<T>>,
    cfg: ConvConfig,
) -> Result<()> {
    backward_impl(grad_out, input, weight, bias, cfg, false).map(|_| ())
}

fn backward_impl<T: Scalar>(
    grad_out: &Tensor<T>,
    input: &Tensor<T>,
    weight: &mut Param<T>,
    bias: Option<&mut Param<T>>,
    cfg: ConvConfig,
    want_input: bool,
) -> Result<Option<Tensor<T>>> {
    let g = geometry(input.shape(), weight.shape(), cfg)?;
    let expected = [g.n, g.cout, g.oh, g.ow];
    if grad_out.shape() != expected {
        return Err(TensorError::ShapeMismatch { op: "conv2d_backward", lhs: grad_out.shape(), rhs: expected });
    }
    let k = g.k();
    let in_plane = g.h * g.w;
    let out_plane = g.oh * g.ow;

    if let Some(b) = bias {
        if !b.frozen {
            let mut gb = vec![T::zero(); g.cout];
            for ni in 0..g.n {
                for (c, acc) in gb.iter_mut().enumerate() {
                    *acc = grad_out.plane(ni, c).iter().fold(*acc, |s, &v| s + v);
                }
            }
            b.accumulate(&gb);
        }
    }

    let want_weight = !weight.frozen;
    if !want_weight && !want_input {
        return Ok(None);
    }

    let mut grad_w = if want_weight { vec![T::zero(); weight.value.len()] } else { Vec::new() };
    let mut grad_in = if want_input { Some(Tensor::try_zeros(input.shape())?) } else { None };
    let rows_per_chunk = g.rows_per_chunk();
    let mut col = vec![T::zero(); if g.pointwise() { 0 } else { k * rows_per_chunk * g.ow }];
    let mut gcol = vec![T::zero(); if g.pointwise() || !want_input { 0 } else { k * rows_per_chunk * g.ow }];
    let w = weight.value.data();

    for ni in 0..g.n {
        for gi in 0..g.groups {
            let img = &input.image(ni)[gi * g.cin_g * in_plane..(gi + 1) * g.cin_g * in_plane];
            let go = &grad_out.image(ni)[gi * g.cout_g * out_plane..(gi + 1) * g.cout_g * out_plane];
            let wg = &w[gi * g.cout_g * k..(gi + 1) * g.cout_g * k];
            let gw_range = gi * g.cout_g * k..(gi + 1) * g.cout_g * k;

            if g.pointwise() {
                if want_weight {
                    // gw[cout_g × k] += go[cout_g × P] · img^T[P × k]
                    unsafe {
                        T::gemm(
                            g.cout_g, out_plane, k, T::one(),
                            go.as_ptr(), out_plane as isize, 1,
                            img.as_ptr(), 1, in_plane as isize,
                            T::one(),
                            grad_w[gw_range.clone()].as_mut_ptr(), k as isize, 1,
                        );
                    }
                }
                if let Some(gi_t) = grad_in.as_mut() {
                    let gimg = &mut gi_t.image_mut(ni)[gi * g.cin_g * in_plane..(gi + 1) * g.cin_g * in_plane];
                    // gin[k × P] = wg^T[k × cout_g] · go[cout_g × P]
                    unsafe {
                        T::gemm(
                            k, g.cout_g, in_plane, T::one(),
                            wg.as_ptr(), 1, k as isize,
                            go.as_ptr(), out_plane as isize, 1,
                            T::zero(),
                            gimg.as_mut_ptr(), in_plane as isize, 1,
                        );
                    }
                }
                continue;
            }

            let mut y0 = 0;
            while y0 < g.oh {
                let rows = rows_per_chunk.min(g.oh - y0);
                let n_cols = rows * g.ow;
                let go_band = go[y0 * g.ow..].as_ptr();
                if want_weight {
                    im2col(&g, img, y0, rows, &mut col[..k * n_cols]);
                    unsafe {
                        T::gemm(
                            g.cout_g, n_cols, k, T::one(),
                            go_band, out_plane as isize, 1,
                            col.as_ptr(), 1, n_cols as isize,
                            T::one(),
                            grad_w[gw_range.clone()].as_mut_ptr(), k as isize, 1,
                        );
                    }
                }
                if let Some(gi_t) = grad_in.as_mut() {
                    unsafe {
                        T::gemm(
                            k, g.cout_g, n_cols, T::one(),
                            wg.as_ptr(), 1, k as isize,
                            go_band, out_plane as isize, 1,
                            T::zero(),
                            gcol.as_mut_ptr(), n_cols as isize, 1,
                        );
                    }
                    let gimg = &mut gi_t.image_mut(ni)[gi * g.cin_g * in_plane..(gi + 1) * g.cin_g * in_plane];
                    col2im(&g, &gcol[..k * n_cols], y0, rows, gimg);
                }
                y0 += rows;
            }
        }
    }

    if want_weight {
        weight.accumulate(&grad_w);
    }
    Ok(grad_in)
}
