//! Building blocks of the UNet: conv + BN + activation units, depthwise-separable
//! encoder blocks and upsample/concat decoder blocks, each with a training cache.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::tensor::{
    activation, activation_backward, batchnorm, batchnorm_backward, batchnorm_infer_inplace, bilinear_resize,
    bilinear_resize_backward, concat_channels, conv2d, conv2d_backward, conv2d_backward_params, split_channels,
    Activation, BatchNormCache, ConvConfig, NormMode, Param, RunningStats, Tensor, TensorError,
};

pub(crate) const BN_EPS: f64 = 1e-5;
pub(crate) const BN_MOMENTUM: f64 = 0.1;

type Result<T> = std::result::Result<T, TensorError>;

/// Named view of one stored array (parameter or running statistic).
pub(crate) struct StateRef<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [f32],
}

pub(crate) struct StateMut<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a mut [f32],
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Param,
    pub beta: Param,
    pub stats: RunningStats,
}

impl BatchNorm {
    fn new(channels: usize) -> Self {
        Self {
            gamma: Param::new(Tensor::full([channels, 1, 1, 1], 1.0)),
            beta: Param::new(Tensor::zeros([channels, 1, 1, 1])),
            stats: RunningStats::new(channels),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvBnAct {
    pub weight: Param,
    pub bias: Option<Param>,
    pub cfg: ConvConfig,
    pub bn: Option<BatchNorm>,
    pub act: Activation,
}

pub(crate) struct ConvBnActCache {
    input: Tensor,
    bn: Option<BatchNormCache<f32>>,
    pre_act: Tensor,
}

impl ConvBnAct {
    /// Square `k`×`k` kernel with "same" padding. Weights are He-normal over the
    /// fan-in; a conv followed by BN carries no bias.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new<R: Rng>(
        cin: usize,
        cout: usize,
        k: usize,
        stride: usize,
        groups: usize,
        with_bn: bool,
        act: Activation,
        rng: &mut R,
    ) -> Self {
        let fan_in = (cin / groups) * k * k;
        let normal = Normal::new(0.0f32, (2.0 / fan_in as f32).sqrt()).expect("finite std");
        let weight = Tensor::from_fn([cout, cin / groups, k, k], |_| normal.sample(rng));
        Self {
            weight: Param::new(weight),
            bias: (!with_bn).then(|| Param::new(Tensor::zeros([cout, 1, 1, 1]))),
            cfg: ConvConfig::new(stride, (k - 1) / 2, groups),
            bn: with_bn.then(|| BatchNorm::new(cout)),
            act,
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut y = conv2d(x, &self.weight, self.bias.as_ref(), self.cfg)?;
        if let Some(bn) = &self.bn {
            batchnorm_infer_inplace(&mut y, &bn.gamma, &bn.beta, &bn.stats, BN_EPS)?;
        }
        if self.act != Activation::Identity {
            for v in y.data_mut() {
                *v = self.act.apply(*v);
            }
        }
        Ok(y)
    }

    pub(crate) fn forward_train(&mut self, x: Tensor, mode: NormMode) -> Result<(Tensor, ConvBnActCache)> {
        let z = conv2d(&x, &self.weight, self.bias.as_ref(), self.cfg)?;
        let (pre_act, bn) = match &mut self.bn {
            Some(bn) => {
                let (y, cache) = batchnorm(&z, &bn.gamma, &bn.beta, &mut bn.stats, mode, BN_EPS)?;
                (y, Some(cache))
            }
            None => (z, None),
        };
        let out = activation(&pre_act, self.act);
        Ok((out, ConvBnActCache { input: x, bn, pre_act }))
    }

    pub(crate) fn backward(&mut self, cache: ConvBnActCache, grad: &Tensor, want_input: bool) -> Result<Option<Tensor>> {
        let mut g = activation_backward(grad, &cache.pre_act, self.act)?;
        if let (Some(bn), Some(bc)) = (&mut self.bn, &cache.bn) {
            g = batchnorm_backward(&g, bc, &mut bn.gamma, &mut bn.beta)?;
        }
        if want_input {
            conv2d_backward(&g, &cache.input, &mut self.weight, self.bias.as_mut(), self.cfg).map(Some)
        } else {
            conv2d_backward_params(&g, &cache.input, &mut self.weight, self.bias.as_mut(), self.cfg)?;
            Ok(None)
        }
    }

    pub(crate) fn params_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Param>) {
        out.push(&mut self.weight);
        if let Some(b) = &mut self.bias {
            out.push(b);
        }
        if let Some(bn) = &mut self.bn {
            out.push(&mut bn.gamma);
            out.push(&mut bn.beta);
        }
    }

    pub(crate) fn params<'a>(&'a self, out: &mut Vec<&'a Param>) {
        out.push(&self.weight);
        if let Some(b) = &self.bias {
            out.push(b);
        }
        if let Some(bn) = &self.bn {
            out.push(&bn.gamma);
            out.push(&bn.beta);
        }
    }

    pub(crate) fn state<'a>(&'a self, prefix: &str, out: &mut Vec<StateRef<'a>>) {
        let mut push = |name: &str, shape: Vec<usize>, data: &'a [f32]| {
            out.push(StateRef { name: format!("{prefix}.{name}"), shape, data })
        };
        push("weight", self.weight.shape().to_vec(), self.weight.value.data());
        if let Some(b) = &self.bias {
            push("bias", vec![b.value.len()], b.value.data());
        }
        if let Some(bn) = &self.bn {
            let c = bn.stats.mean.len();
            push("bn.gamma", vec![c], bn.gamma.value.data());
            push("bn.beta", vec![c], bn.beta.value.data());
            push("bn.running_mean", vec![c], &bn.stats.mean);
            push("bn.running_var", vec![c], &bn.stats.var);
        }
    }

    pub(crate) fn state_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<StateMut<'a>>) {
        let mut push = |name: &str, shape: Vec<usize>, data: &'a mut [f32]| {
            out.push(StateMut { name: format!("{prefix}.{name}"), shape, data })
        };
        let wshape = self.weight.shape().to_vec();
        push("weight", wshape, self.weight.value.data_mut());
        if let Some(b) = &mut self.bias {
            let n = b.value.len();
            push("bias", vec![n], b.value.data_mut());
        }
        if let Some(bn) = &mut self.bn {
            let c = bn.stats.mean.len();
            push("bn.gamma", vec![c], bn.gamma.value.data_mut());
            push("bn.beta", vec![c], bn.beta.value.data_mut());
            push("bn.running_mean", vec![c], &mut bn.stats.mean);
            push("bn.running_var", vec![c], &mut bn.stats.var);
        }
    }
}

/// Depthwise 3×3 + BN + hard-swish, then pointwise 1×1 + BN + hard-swish.
/// Stride-1 blocks with matching widths add their input back.
#[derive(Debug, Clone, PartialEq)]
pub struct DsBlock {
    pub dw: ConvBnAct,
    pub pw: ConvBnAct,
    pub residual: bool,
}

pub(crate) struct DsBlockCache {
    dw: ConvBnActCache,
    pw: ConvBnActCache,
}

impl DsBlock {
    pub(crate) fn new<R: Rng>(cin: usize, cout: usize, stride: usize, rng: &mut R) -> Self {
        Self {
            dw: ConvBnAct::new(cin, cin, 3, stride, cin, true, Activation::HardSwish, rng),
            pw: ConvBnAct::new(cin, cout, 1, 1, 1, true, Activation::HardSwish, rng),
            residual: stride == 1 && cin == cout,
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut y = self.pw.forward(&self.dw.forward(x)?)?;
        if self.residual {
            y.add_assign(x)?;
        }
        Ok(y)
    }

    pub(crate) fn forward_train(&mut self, x: Tensor, mode: NormMode) -> Result<(Tensor, DsBlockCache)> {
        let skip = self.residual.then(|| x.clone());
        let (h, dw) = self.dw.forward_train(x, mode)?;
        let (mut y, pw) = self.pw.forward_train(h, mode)?;
        if let Some(s) = skip {
            y.add_assign(&s)?;
        }
        Ok((y, DsBlockCache { dw, pw }))
    }

    pub(crate) fn backward(&mut self, cache: DsBlockCache, grad: &Tensor, want_input: bool) -> Result<Option<Tensor>> {
        let gh = self.pw.backward(cache.pw, grad, true)?.expect("requested");
        match self.dw.backward(cache.dw, &gh, want_input)? {
            Some(mut gx) => {
                if self.residual {
                    gx.add_assign(grad)?;
                }
                Ok(Some(gx))
            }
            None => Ok(None),
        }
    }
}

/// Bilinear upsample to the skip's size, concat the skip, then two 3×3
/// conv + BN + ReLU units.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderBlock {
    pub conv1: ConvBnAct,
    pub conv2: ConvBnAct,
}

pub(crate) struct DecoderCache {
    in_hw: (usize, usize),
    up_channels: usize,
    conv1: ConvBnActCache,
    conv2: ConvBnActCache,
}

fn upsample_to(x: &Tensor, h: usize, w: usize) -> Result<Tensor> {
    if x.height() == h && x.width() == w {
        Ok(x.clone())
    } else {
        bilinear_resize(x, h, w)
    }
}

impl DecoderBlock {
    pub(crate) fn new<R: Rng>(cin: usize, skip: usize, cout: usize, rng: &mut R) -> Self {
        Self {
            conv1: ConvBnAct::new(cin + skip, cout, 3, 1, 1, true, Activation::Relu, rng),
            conv2: ConvBnAct::new(cout, cout, 3, 1, 1, true, Activation::Relu, rng),
        }
    }

    pub fn forward(&self, x: &Tensor, skip: &Tensor) -> Result<Tensor> {
        let up = upsample_to(x, skip.height(), skip.width())?;
        let cat = concat_channels(&up, skip)?;
        drop(up);
        let h = self.conv1.forward(&cat)?;
        drop(cat);
        self.conv2.forward(&h)
    }

    pub(crate) fn forward_train(&mut self, x: &Tensor, skip: &Tensor, mode: NormMode) -> Result<(Tensor, DecoderCache)> {
        let up = upsample_to(x, skip.height(), skip.width())?;
        let cat = concat_channels(&up, skip)?;
        let (h, conv1) = self.conv1.forward_train(cat, mode)?;
        let (y, conv2) = self.conv2.forward_train(h, mode)?;
        let cache = DecoderCache { in_hw: (x.height(), x.width()), up_channels: x.channels(), conv1, conv2 };
        Ok((y, cache))
    }

    /// Returns (grad wrt `x`, grad wrt `skip` if requested).
    pub(crate) fn backward(
        &mut self,
        cache: DecoderCache,
        grad: &Tensor,
        want_x: bool,
        want_skip: bool,
    ) -> Result<(Option<Tensor>, Option<Tensor>)> {
        let gh = self.conv2.backward(cache.conv2, grad, true)?.expect("requested");
        if !want_x && !want_skip {
            self.conv1.backward(cache.conv1, &gh, false)?;
            return Ok((None, None));
        }
        let gcat = self.conv1.backward(cache.conv1, &gh, true)?.expect("requested");
        let (gup, gskip) = split_channels(&gcat, cache.up_channels)?;
        let gx = if want_x {
            let (h, w) = cache.in_hw;
            Some(if gup.height() == h && gup.width() == w { gup } else { bilinear_resize_backward(&gup, h, w)? })
        } else {
            None
        };
        Ok((gx, want_skip.then_some(gskip)))
    }
}
