use super::TrainError;
use crate::datapipe::IGNORE;
use crate::tensor::{Scalar, Tensor};

/// Mean binary cross-entropy over non-ignored pixels, computed from logits
/// as `max(z, 0) - y z + ln(1 + e^{-|z|})`. Returns the loss and
/// d(loss)/d(logits) `= (sigmoid(z) - y) / n` (zero on ignored pixels).
pub fn bce_with_logits<T: Scalar>(logits: &Tensor<T>, labels: &[u8]) -> Result<(f64, Tensor<T>), TrainError> {
    if logits.len() != labels.len() {
        return Err(TrainError::Shape(format!("{} logits vs {} labels", logits.len(), labels.len())));
    }
    let n = labels.iter().filter(|&&l| l != IGNORE).count();
    if n == 0 {
        return Err(TrainError::AllIgnored);
    }
    let inv_n = 1.0 / n as f64;
    let mut grad = Tensor::zeros(logits.shape());
    let mut loss = 0f64;
    for ((g, &z), &l) in grad.data_mut().iter_mut().zip(logits.data()).zip(labels) {
        if l == IGNORE {
            continue;
        }
        let z = z.to_f64().expect("finite");
        let y = f64::from(l);
        loss += z.max(0.0) - y * z + (-z.abs()).exp().ln_1p();
        let p = if z >= 0.0 { 1.0 / (1.0 + (-z).exp()) } else { z.exp() / (1.0 + z.exp()) };
        *g = T::from((p - y) * inv_n).expect("finite");
    }
    Ok((loss * inv_n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_probability_is_ln2() {
        let z = Tensor::<f32>::zeros([1, 1, 4, 4]);
        let labels: Vec<u8> = (0..16).map(|i| (i % 2) as u8).collect();
        let (loss, _) = bce_with_logits(&z, &labels).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn confident_and_correct_is_near_zero() {
        let z = Tensor::<f32>::from_vec([1, 1, 1, 2], vec![40.0, -40.0]).unwrap();
        let (loss, g) = bce_with_logits(&z, &[1, 0]).unwrap();
        assert!(loss < 1e-15);
        assert!(g.data().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn huge_logits_stay_finite() {
        let z = Tensor::<f32>::from_vec([1, 1, 1, 2], vec![1e30, -1e30]).unwrap();
        let (loss, g) = bce_with_logits(&z, &[0, 1]).unwrap();
        assert!(loss.is_finite() && g.is_finite());
    }

    #[test]
    fn ignored_pixels() {
        let z = Tensor::<f32>::from_vec([1, 1, 1, 3], vec![0.0, 5.0, -5.0]).unwrap();
        let (_, g) = bce_with_logits(&z, &[1, IGNORE, IGNORE]).unwrap();
        assert_eq!(g.data()[1..], [0.0, 0.0]);
        assert!(matches!(bce_with_logits(&z, &[IGNORE; 3]), Err(TrainError::AllIgnored)));
    }
}
