//! Central finite-difference oracle for the kernel gradient checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tseg_core::tensor::{
    activation, activation_backward, batchnorm, batchnorm_backward, bilinear_resize, bilinear_resize_backward,
    concat_channels, conv2d, conv2d_backward, split_channels, Activation, ConvConfig, NormMode, RunningStats,
};
use tseg_core::trainer::bce_with_logits;
use tseg_core::{Param, Tensor};

pub const EPS: f64 = 1e-3;
pub const REL_TOL: f64 = 1e-3;
pub const ABS_FLOOR: f64 = 1e-6;

/// Worst elementwise relative error between analytic and numeric gradients.
/// Each element's error is `|a - n| / max(|a|, |n|)`, and elements whose
/// absolute error is below the floor count as exact.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| {
            let abs = (a - n).abs();
            if abs <= ABS_FLOOR {
                0.0
            } else {
                abs / a.abs().max(n.abs())
            }
        })
        .fold(0.0, f64::max)
}

/// Numeric gradient of `f` at `x` by central differences.
pub fn numeric_grad(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = xp[i];
            xp[i] = orig + EPS;
            let fp = f(&xp);
            xp[i] = orig - EPS;
            let fm = f(&xp);
            xp[i] = orig;
            (fp - fm) / (2.0 * EPS)
        })
        .collect()
}

pub fn rand_tensor(rng: &mut ChaCha8Rng, shape: [usize; 4]) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

fn with_data(shape: [usize; 4], data: &[f64]) -> Tensor<f64> {
    Tensor::from_vec(shape, data.to_vec()).unwrap()
}

/// Projection `sum(r * y)` used as the scalar loss in every check.
fn project(y: &Tensor<f64>, r: &Tensor<f64>) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

/// One named check outcome.
#[derive(Debug)]
pub struct GradCheck {
    pub name: String,
    pub max_rel_err: f64,
    pub n_params: usize,
}

pub fn conv_case(seed: u64) -> Vec<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let configs = [
        ([1, 2, 5, 5], [3, 2, 3, 3], ConvConfig::new(1, 1, 1)),
        ([2, 2, 6, 6], [2, 1, 3, 3], ConvConfig::new(2, 1, 2)),
        ([1, 4, 5, 4], [4, 1, 3, 3], ConvConfig::new(1, 1, 4)),
        ([2, 3, 4, 4], [2, 3, 1, 1], ConvConfig::new(1, 0, 1)),
        ([1, 1, 7, 6], [2, 1, 3, 3], ConvConfig::new(2, 0, 1)),
    ];
    let (xs, ws, cfg) = configs[(seed % configs.len() as u64) as usize];
    let x = rand_tensor(&mut rng, xs);
    let w = rand_tensor(&mut rng, ws);
    let b = rand_tensor(&mut rng, [ws[0], 1, 1, 1]);
    let fwd = |x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>| {
        conv2d(x, &Param::new(w.clone()), Some(&Param::new(b.clone())), cfg).unwrap()
    };
    let y = fwd(&x, &w, &b);
    let r = rand_tensor(&mut rng, y.shape());
    let mut wp = Param::new(w.clone());
    let mut bp = Param::new(b.clone());
    let gx = conv2d_backward(&r, &x, &mut wp, Some(&mut bp), cfg).unwrap();

    let nx = numeric_grad(x.data(), |d| project(&fwd(&with_data(xs, d), &w, &b), &r));
    let nw = numeric_grad(w.data(), |d| project(&fwd(&x, &with_data(ws, d), &b), &r));
    let nb = numeric_grad(b.data(), |d| project(&fwd(&x, &w, &with_data(b.shape(), d)), &r));
    vec![
        GradCheck { name: format!("conv2d/input {cfg:?}"), max_rel_err: max_rel_err(gx.data(), &nx), n_params: nx.len() },
        GradCheck { name: format!("conv2d/weight {cfg:?}"), max_rel_err: max_rel_err(wp.grad.data(), &nw), n_params: nw.len() },
        GradCheck { name: format!("conv2d/bias {cfg:?}"), max_rel_err: max_rel_err(bp.grad.data(), &nb), n_params: nb.len() },
    ]
}

pub fn batchnorm_case(seed: u64, train: bool) -> Vec<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = [2, 3, 4, 3];
    let x = Tensor::from_fn(shape, |[_, c, _, _]| rng.random_range(-1.0..1.0) * (1.0 + c as f64) + c as f64);
    let g = Tensor::from_fn([3, 1, 1, 1], |_| rng.random_range(0.5..1.5));
    let b = rand_tensor(&mut rng, [3, 1, 1, 1]);
    let stats = RunningStats { mean: vec![0.3, -0.2, 1.1], var: vec![0.8, 1.7, 2.5] };
    let mode = if train { NormMode::Train { momentum: 0.1 } } else { NormMode::Infer };
    let fwd = |x: &Tensor<f64>, g: &Tensor<f64>, b: &Tensor<f64>| {
        let mut st = stats.clone();
        batchnorm(x, &Param::new(g.clone()), &Param::new(b.clone()), &mut st, mode, 1e-5).unwrap()
    };
    let (y, cache) = fwd(&x, &g, &b);
    let r = rand_tensor(&mut rng, y.shape());
    let mut gp = Param::new(g.clone());
    let mut bp = Param::new(b.clone());
    let gx = batchnorm_backward(&r, &cache, &mut gp, &mut bp).unwrap();
    let tag = if train { "train" } else { "infer" };
    let nx = numeric_grad(x.data(), |d| project(&fwd(&with_data(shape, d), &g, &b).0, &r));
    let ng = numeric_grad(g.data(), |d| project(&fwd(&x, &with_data([3, 1, 1, 1], d), &b).0, &r));
    let nb = numeric_grad(b.data(), |d| project(&fwd(&x, &g, &with_data([3, 1, 1, 1], d)).0, &r));
    vec![
        GradCheck { name: format!("batchnorm[{tag}]/input"), max_rel_err: max_rel_err(gx.data(), &nx), n_params: nx.len() },
        GradCheck { name: format!("batchnorm[{tag}]/gamma"), max_rel_err: max_rel_err(gp.grad.data(), &ng), n_params: 3 },
        GradCheck { name: format!("batchnorm[{tag}]/beta"), max_rel_err: max_rel_err(bp.grad.data(), &nb), n_params: 3 },
    ]
}

/// Inputs are kept at least `4 * EPS` away from every kink of `kind`.
pub fn activation_case(seed: u64, kind: Activation) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kinks: &[f64] = match kind {
        Activation::Relu => &[0.0],
        Activation::HardSwish => &[-3.0, 3.0],
        _ => &[],
    };
    let x = Tensor::from_fn([1, 2, 5, 5], |_| loop {
        let v: f64 = rng.random_range(-5.0..5.0);
        if kinks.iter().all(|k| (v - k).abs() > 4.0 * EPS) {
            break v;
        }
    });
    let r = rand_tensor(&mut rng, x.shape());
    let gx = activation_backward(&r, &x, kind).unwrap();
    let nx = numeric_grad(x.data(), |d| project(&activation(&with_data(x.shape(), d), kind), &r));
    GradCheck { name: format!("activation/{kind:?}"), max_rel_err: max_rel_err(gx.data(), &nx), n_params: nx.len() }
}

pub fn resize_case(seed: u64) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = [(4, 4, 8, 8), (5, 3, 2, 7), (3, 6, 6, 12), (6, 6, 3, 3), (2, 5, 9, 4)];
    let (h, w, oh, ow) = dims[(seed % dims.len() as u64) as usize];
    let x = rand_tensor(&mut rng, [1, 2, h, w]);
    let r = rand_tensor(&mut rng, [1, 2, oh, ow]);
    let gx = bilinear_resize_backward(&r, h, w).unwrap();
    let nx = numeric_grad(x.data(), |d| project(&bilinear_resize(&with_data(x.shape(), d), oh, ow).unwrap(), &r));
    GradCheck { name: format!("bilinear_resize {h}x{w}->{oh}x{ow}"), max_rel_err: max_rel_err(gx.data(), &nx), n_params: nx.len() }
}

pub fn concat_case(seed: u64) -> Vec<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = rand_tensor(&mut rng, [2, 2, 3, 3]);
    let b = rand_tensor(&mut rng, [2, 3, 3, 3]);
    let r = rand_tensor(&mut rng, [2, 5, 3, 3]);
    let (ga, gb) = split_channels(&r, 2).unwrap();
    let na = numeric_grad(a.data(), |d| project(&concat_channels(&with_data(a.shape(), d), &b).unwrap(), &r));
    let nb = numeric_grad(b.data(), |d| project(&concat_channels(&a, &with_data(b.shape(), d)).unwrap(), &r));
    vec![
        GradCheck { name: "concat/a".into(), max_rel_err: max_rel_err(ga.data(), &na), n_params: na.len() },
        GradCheck { name: "concat/b".into(), max_rel_err: max_rel_err(gb.data(), &nb), n_params: nb.len() },
    ]
}

/// Loss gradient on logits, with a few ignored pixels.
pub fn bce_case(seed: u64) -> GradCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = rand_tensor(&mut rng, [2, 1, 4, 5]).map(|v| v * 3.0);
    let labels: Vec<u8> = (0..z.len()).map(|_| [0u8, 1, 1, 0, 255][rng.random_range(0..5)]).collect();
    let labels = if labels.iter().all(|&l| l == 255) { vec![1; z.len()] } else { labels };
    let (_, g) = bce_with_logits(&z, &labels).unwrap();
    let n = numeric_grad(z.data(), |d| bce_with_logits(&with_data(z.shape(), d), &labels).unwrap().0);
    GradCheck { name: "bce_with_logits".into(), max_rel_err: max_rel_err(g.data(), &n), n_params: n.len() }
}

/// Every kernel check for one random seed.
pub fn all_kernel_checks(seed: u64) -> Vec<GradCheck> {
    let mut out = conv_case(seed);
    out.extend(batchnorm_case(seed, true));
    out.extend(batchnorm_case(seed, false));
    for kind in [Activation::Relu, Activation::HardSwish, Activation::Sigmoid] {
        out.push(activation_case(seed, kind));
    }
    out.push(resize_case(seed));
    out.extend(concat_case(seed));
    out.push(bce_case(seed));
    out
}
