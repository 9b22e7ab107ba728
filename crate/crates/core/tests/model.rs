use tseg_core::model::{Model, ModelError, ModelSpec};
use tseg_core::Tensor;

fn ramp(shape: [usize; 4]) -> Tensor {
    Tensor::from_fn(shape, |[n, _, y, x]| ((y * 31 + x * 17 + n * 5) % 23) as f32 * 0.1 - 1.0)
}

/// Parameter count from shape arithmetic alone: per encoder block a
/// depthwise 3x3 (cin*9) + BN (2*cin) and a pointwise (cin*cout) + BN
/// (2*cout); per decoder stage two 3x3 convs + BN; a 1x1 head with bias.
fn count_by_hand(spec: &ModelSpec) -> usize {
    let mut total = 0;
    let mut cin = spec.input_channels;
    let mut widths = vec![cin];
    for st in &spec.encoder {
        for _ in 0..st.blocks {
            total += cin * 9 + 2 * cin + cin * st.out_channels + 2 * st.out_channels;
            cin = st.out_channels;
        }
        widths.push(cin);
    }
    widths.pop();
    for &cout in &spec.decoder {
        let skip = widths.pop().unwrap();
        total += (cin + skip) * cout * 9 + 2 * cout + cout * cout * 9 + 2 * cout;
        cin = cout;
    }
    total + cin + 1
}

#[test]
fn parameter_count_matches_shape_arithmetic() {
    for spec in [ModelSpec::default(), ModelSpec::compact()] {
        let mut m = Model::build(&spec, 0).unwrap();
        assert_eq!(m.parameter_count(), count_by_hand(&spec));
    }
    // also independently recomputed outside Rust
    assert_eq!(Model::build(&ModelSpec::default(), 1).unwrap().parameter_count(), 86_172);
}

#[test]
fn same_seed_same_parameters() {
    let a = Model::build(&ModelSpec::default(), 42).unwrap();
    let b = Model::build(&ModelSpec::default(), 42).unwrap();
    let c = Model::build(&ModelSpec::default(), 43).unwrap();
    assert_eq!(a.state_digest(), b.state_digest());
    assert_ne!(a.state_digest(), c.state_digest());
}

#[test]
fn asymmetric_spec_rejected() {
    let mut spec = ModelSpec::default();
    spec.encoder.pop();
    assert!(matches!(Model::build(&spec, 0), Err(ModelError::InvalidSpec(_))));
}

#[test]
fn output_shape_and_range() {
    let m = Model::build(&ModelSpec::default(), 1).unwrap();
    for shape in [[1, 1, 256, 256], [2, 1, 512, 512]] {
        let y = m.forward(&ramp(shape)).unwrap();
        assert_eq!(y.shape(), shape);
        assert!(y.data().iter().all(|&p| p > 0.0 && p < 1.0));
    }
}

#[test]
fn non_divisible_input_reports_multiple() {
    let m = Model::build(&ModelSpec::compact(), 1).unwrap();
    let err = m.forward(&Tensor::zeros([1, 1, 40, 48])).unwrap_err();
    assert!(matches!(&err, ModelError::Shape(msg) if msg.contains("16")), "{err}");
}

#[test]
fn zero_input_gives_constant_interior() {
    let m = Model::build(&ModelSpec::default(), 5).unwrap();
    let y = m.forward_logits(&Tensor::zeros([1, 1, 256, 256])).unwrap();
    // beyond the receptive field from every border the net sees only zeros
    let r = 80;
    let centre = y.at([0, 0, 128, 128]);
    for yy in r..256 - r {
        for xx in r..256 - r {
            assert!((y.at([0, 0, yy, xx]) - centre).abs() <= 1e-6);
        }
    }
}

#[test]
fn translation_equivariant_by_sixteen() {
    let m = Model::build(&ModelSpec::default(), 9).unwrap();
    let (h, w, s) = (256, 256, 16);
    let big = Tensor::from_fn([1, 1, h + s, w + s], |[_, _, y, x]| ((y * y + 3 * x) % 29) as f32 * 0.07 - 1.0);
    let a = Tensor::from_fn([1, 1, h, w], |[_, _, y, x]| big.at([0, 0, y, x]));
    let b = Tensor::from_fn([1, 1, h, w], |[_, _, y, x]| big.at([0, 0, y + s, x + s]));
    let ya = m.forward(&a).unwrap();
    let yb = m.forward(&b).unwrap();
    let margin = 80;
    let mut worst = 0f32;
    for y in margin + s..h - margin {
        for x in margin + s..w - margin {
            worst = worst.max((ya.at([0, 0, y, x]) - yb.at([0, 0, y - s, x - s])).abs());
        }
    }
    assert!(worst <= 1e-5, "max interior deviation {worst}");
}

fn one_step(m: &mut Model, lr: f32) {
    let x = ramp([2, 1, 32, 32]);
    m.zero_grad();
    let (logits, tape) = m.forward_train(&x).unwrap();
    // d/dlogit of mean(logit) pushes every parameter with a nonzero path
    let g = Tensor::full(logits.shape(), 1.0 / logits.len() as f32);
    m.backward(tape, &g).unwrap();
    for p in m.params_mut() {
        if p.frozen {
            continue;
        }
        let grad = p.grad.data().to_vec();
        for (v, g) in p.value.data_mut().iter_mut().zip(grad) {
            *v -= lr * g;
        }
    }
}

#[test]
fn frozen_encoder_is_untouched() {
    let mut m = Model::build(&ModelSpec::compact(), 2).unwrap();
    m.set_encoder_frozen(true);
    m.set_encoder_frozen(true);
    assert!(m.encoder_frozen());
    let before = m.encoder_digest();
    let all_before = m.state_digest();
    for _ in 0..3 {
        one_step(&mut m, 0.1);
    }
    assert_eq!(m.encoder_digest(), before);
    assert_ne!(m.state_digest(), all_before);
    assert!(m.params_mut().iter().filter(|p| p.frozen).all(|p| p.grad.data().iter().all(|&g| g == 0.0)));
}

#[test]
fn unfrozen_encoder_changes() {
    let mut m = Model::build(&ModelSpec::compact(), 2).unwrap();
    m.set_encoder_frozen(true);
    m.set_encoder_frozen(false);
    assert!(!m.encoder_frozen());
    let before = m.encoder_digest();
    one_step(&mut m, 0.1);
    assert_ne!(m.encoder_digest(), before);
}
