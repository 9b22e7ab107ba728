//! Dense NCHW tensors and the forward/backward kernels the network is built from.
//!
//! Kernels are free functions over borrowed tensors. Backward kernels accumulate
//! into [`Param::grad`] (`+=`); callers zero gradients between optimizer steps.
//! Everything is generic over [`Scalar`] so gradient checks can run in `f64`,
//! while the network itself is `f32` throughout.

mod act;
mod concat;
mod conv;
mod norm;
mod resize;
mod scalar;

pub use act::{activation, activation_backward, sigmoid, Activation};
pub use concat::{concat_channels, split_channels};
pub use conv::{conv2d, conv2d_backward, conv2d_backward_params, ConvConfig};
pub use norm::{batchnorm, batchnorm_backward, batchnorm_infer_inplace, BatchNormCache, NormMode, RunningStats};
pub use resize::{bilinear_resize, bilinear_resize_backward, bilinear_taps, Tap};
pub use scalar::Scalar;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: [usize; 4],
        rhs: [usize; 4],
    },
    #[error("{op}: invalid argument: {reason}")]
    InvalidArgument { op: &'static str, reason: String },
    #[error("cannot allocate tensor of shape {shape:?} ({bytes} bytes)")]
    OutOfMemory { shape: [usize; 4], bytes: usize },
}

pub type Result<T, E = TensorError> = std::result::Result<T, E>;

/// Dense 4-d array in (batch, channels, height, width) order, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T = f32> {
    shape: [usize; 4],
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: [usize; 4]) -> Self {
        assert!(shape.iter().all(|&d| d >= 1), "tensor dims must be >= 1, got {shape:?}");
        Self { shape, data: vec![T::zero(); shape.iter().product()] }
    }

    /// Like [`Tensor::zeros`] but reports allocation failure instead of aborting.
    pub fn try_zeros(shape: [usize; 4]) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(TensorError::InvalidArgument {
                op: "try_zeros",
                reason: format!("tensor dims must be >= 1, got {shape:?}"),
            });
        }
        let len: usize = shape.iter().product();
        let mut data = Vec::new();
        data.try_reserve_exact(len).map_err(|_| TensorError::OutOfMemory {
            shape,
            bytes: len.saturating_mul(std::mem::size_of::<T>()),
        })?;
        data.resize(len, T::zero());
        Ok(Self { shape, data })
    }

    pub fn full(shape: [usize; 4], value: T) -> Self {
        let mut t = Self::zeros(shape);
        t.data.fill(value);
        t
    }

    pub fn from_vec(shape: [usize; 4], data: Vec<T>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if shape.iter().any(|&d| d == 0) || data.len() != len {
            return Err(TensorError::InvalidArgument {
                op: "from_vec",
                reason: format!("shape {shape:?} needs {len} elements, got {}", data.len()),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn from_fn(shape: [usize; 4], mut f: impl FnMut([usize; 4]) -> T) -> Self {
        let [n, c, h, w] = shape;
        let mut t = Self::zeros(shape);
        let mut i = 0;
        for ni in 0..n {
            for ci in 0..c {
                for y in 0..h {
                    for x in 0..w {
                        t.data[i] = f([ni, ci, y, x]);
                        i += 1;
                    }
                }
            }
        }
        t
    }

    #[inline]
    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }
    #[inline]
    pub fn batch(&self) -> usize {
        self.shape[0]
    }
    #[inline]
    pub fn channels(&self) -> usize {
        self.shape[1]
    }
    #[inline]
    pub fn height(&self) -> usize {
        self.shape[2]
    }
    #[inline]
    pub fn width(&self) -> usize {
        self.shape[3]
    }
    #[inline]
    pub fn plane_len(&self) -> usize {
        self.shape[2] * self.shape[3]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, [n, c, y, x]: [usize; 4]) -> usize {
        ((n * self.shape[1] + c) * self.shape[2] + y) * self.shape[3] + x
    }

    #[inline]
    pub fn at(&self, idx: [usize; 4]) -> T {
        self.data[self.index(idx)]
    }

    #[inline]
    pub fn set(&mut self, idx: [usize; 4], v: T) {
        let i = self.index(idx);
        self.data[i] = v;
    }

    /// The (h, w) plane of image `n`, channel `c`.
    pub fn plane(&self, n: usize, c: usize) -> &[T] {
        let p = self.plane_len();
        let start = (n * self.shape[1] + c) * p;
        &self.data[start..start + p]
    }

    pub fn plane_mut(&mut self, n: usize, c: usize) -> &mut [T] {
        let p = self.plane_len();
        let start = (n * self.shape[1] + c) * p;
        &mut self.data[start..start + p]
    }

    /// All channels of image `n`.
    pub fn image(&self, n: usize) -> &[T] {
        let len = self.shape[1] * self.plane_len();
        &self.data[n * len..(n + 1) * len]
    }

    pub fn image_mut(&mut self, n: usize) -> &mut [T] {
        let len = self.shape[1] * self.plane_len();
        &mut self.data[n * len..(n + 1) * len]
    }

    pub fn fill(&mut self, v: T) {
        self.data.fill(v);
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { shape: self.shape, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).sum()
    }

    /// Elementwise `self += other`.
    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(TensorError::ShapeMismatch { op: "add", lhs: self.shape, rhs: other.shape });
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|v| U::from(*v).unwrap_or_else(U::nan)).collect(),
        }
    }
}

/// A trainable tensor with its gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T = f32> {
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
    pub frozen: bool,
}

impl<T: Scalar> Param<T> {
    pub fn new(value: Tensor<T>) -> Self {
        let grad = Tensor::zeros(value.shape());
        Self { value, grad, frozen: false }
    }

    pub fn shape(&self) -> [usize; 4] {
        self.value.shape()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }

    /// Adds `delta` into the gradient unless the parameter is frozen.
    pub(crate) fn accumulate(&mut self, delta: &[T]) {
        if self.frozen {
            return;
        }
        debug_assert_eq!(delta.len(), self.grad.len());
        for (g, &d) in self.grad.data_mut().iter_mut().zip(delta) {
            *g = *g + d;
        }
    }
}

/// Mirror index `i` into `0..len` (reflect without repeating the edge sample).
pub fn reflect_index(i: isize, len: usize) -> usize {
    if len <= 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let m = i.rem_euclid(period);
    if m < len as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}
