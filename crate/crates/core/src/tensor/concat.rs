use super::{Result, Scalar, Tensor, TensorError};

/// Stacks `b`'s channels after `a`'s.
pub fn concat_channels<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let [na, ca, ha, wa] = a.shape();
    let [nb, cb, hb, wb] = b.shape();
    if na != nb || ha != hb || wa != wb {
        return Err(TensorError::ShapeMismatch { op: "concat_channels", lhs: a.shape(), rhs: b.shape() });
    }
    let mut data = Vec::new();
    data.try_reserve_exact(a.len() + b.len()).map_err(|_| TensorError::OutOfMemory {
        shape: [na, ca + cb, ha, wa],
        bytes: (a.len() + b.len()) * std::mem::size_of::<T>(),
    })?;
    for n in 0..na {
        data.extend_from_slice(a.image(n));
        data.extend_from_slice(b.image(n));
    }
    Tensor::from_vec([na, ca + cb, ha, wa], data)
}

/// Inverse of [`concat_channels`]: the first `first` channels, then the rest.
/// Also serves as the concat backward pass.
pub fn split_channels<T: Scalar>(t: &Tensor<T>, first: usize) -> Result<(Tensor<T>, Tensor<T>)> {
    let [n, c, h, w] = t.shape();
    if first == 0 || first >= c {
        return Err(TensorError::InvalidArgument {
            op: "split_channels",
            reason: format!("split point {first} outside 1..{c}"),
        });
    }
    let p = h * w;
    let mut a = Vec::with_capacity(n * first * p);
    let mut b = Vec::with_capacity(n * (c - first) * p);
    for ni in 0..n {
        let img = t.image(ni);
        a.extend_from_slice(&img[..first * p]);
        b.extend_from_slice(&img[first * p..]);
    }
    Ok((Tensor::from_vec([n, first, h, w], a)?, Tensor::from_vec([n, c - first, h, w], b)?))
}
