use serde::{Deserialize, Serialize};

use super::{Result, Scalar, Tensor, TensorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    HardSwish,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, x: T) -> T {
        let three = T::from(3.0).unwrap();
        let six = T::from(6.0).unwrap();
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(T::zero()),
            Activation::HardSwish => x * (x + three).max(T::zero()).min(six) / six,
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative evaluated at the pre-activation input `x`.
    #[inline]
    pub fn derivative<T: Scalar>(self, x: T) -> T {
        let three = T::from(3.0).unwrap();
        match self {
            Activation::Identity => T::one(),
            Activation::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::HardSwish => {
                if x <= -three {
                    T::zero()
                } else if x >= three {
                    T::one()
                } else {
                    (x + x + three) / T::from(6.0).unwrap()
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (T::one() - s)
            }
        }
    }
}

/// Logistic function, evaluated without overflow for large |x|.
#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn activation<T: Scalar>(input: &Tensor<T>, kind: Activation) -> Tensor<T> {
    input.map(|v| kind.apply(v))
}

/// `grad_in = grad_out * f'(pre)` where `pre` is the forward input.
pub fn activation_backward<T: Scalar>(grad_out: &Tensor<T>, pre: &Tensor<T>, kind: Activation) -> Result<Tensor<T>> {
    if grad_out.shape() != pre.shape() {
        return Err(TensorError::ShapeMismatch { op: "activation_backward", lhs: grad_out.shape(), rhs: pre.shape() });
    }
    let mut out = grad_out.clone();
    for (g, &x) in out.data_mut().iter_mut().zip(pre.data()) {
        *g = *g * kind.derivative(x);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_values() {
        assert_eq!(Activation::Relu.apply(-1.0f32), 0.0);
        assert_eq!(Activation::Relu.apply(2.0f32), 2.0);
    }

    #[test]
    fn hard_swish_breakpoints() {
        assert_eq!(Activation::HardSwish.apply(0.0f32), 0.0);
        assert_eq!(Activation::HardSwish.apply(3.0f32), 3.0);
        assert_eq!(Activation::HardSwish.apply(-3.0f32), 0.0);
        assert_eq!(Activation::HardSwish.apply(10.0f32), 10.0);
        assert!((Activation::HardSwish.apply(1.0f32) - 4.0 / 6.0).abs() < 1e-7);
    }

    #[test]
    fn sigmoid_stays_open_interval() {
        for x in [-80.0f32, -20.0, -1.0, 0.0, 1.0, 15.0] {
            let s = Activation::Sigmoid.apply(x);
            assert!(s > 0.0 && s < 1.0, "sigmoid({x}) = {s}");
        }
        assert_eq!(sigmoid(0.0f64), 0.5);
        assert!(sigmoid(-1000.0f64).is_finite());
    }

    #[test]
    fn sigmoid_gradient_matches_central_difference() {
        let eps = 1e-3;
        for x in [-4.0f64, -1.3, -0.2, 0.0, 0.7, 2.5, 6.0] {
            let fd = (sigmoid(x + eps) - sigmoid(x - eps)) / (2.0 * eps);
            let an = Activation::Sigmoid.derivative(x);
            assert!((fd - an).abs() / an.abs().max(1e-6) <= 1e-4, "x={x}: {fd} vs {an}");
        }
    }
}
