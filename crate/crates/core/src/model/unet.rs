use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::layers::{ConvBnAct, ConvBnActCache, DecoderBlock, DecoderCache, DsBlock, DsBlockCache, StateMut, StateRef, BN_MOMENTUM};
use super::{ModelError, ModelSpec};
use crate::tensor::{sigmoid, Activation, NormMode, Param, Tensor};

/// Compact UNet producing per-pixel cloud logits/probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    encoder: Vec<Vec<DsBlock>>,
    decoder: Vec<DecoderBlock>,
    head: ConvBnAct,
}

/// Activations saved by [`Model::forward_train`] for [`Model::backward`].
pub struct Tape {
    encoder: Option<Vec<Vec<DsBlockCache>>>,
    decoder: Vec<DecoderCache>,
    head: ConvBnActCache,
}

impl Model {
    /// Builds the network with He-initialized weights drawn from `seed`.
    pub fn build(spec: &ModelSpec, seed: u64) -> Result<Self, ModelError> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut encoder = Vec::with_capacity(spec.encoder.len());
        for (i, st) in spec.encoder.iter().enumerate() {
            let mut blocks = vec![DsBlock::new(spec.stage_in_channels(i), st.out_channels, st.stride, &mut rng)];
            for _ in 1..st.blocks {
                blocks.push(DsBlock::new(st.out_channels, st.out_channels, 1, &mut rng));
            }
            encoder.push(blocks);
        }
        let decoder = (0..spec.decoder.len())
            .map(|i| DecoderBlock::new(spec.decoder_in_channels(i), spec.skip_channels(i), spec.decoder[i], &mut rng))
            .collect();
        let last = *spec.decoder.last().expect("validated");
        let head = ConvBnAct::new(last, 1, 1, 1, 1, false, Activation::Identity, &mut rng);
        Ok(Self { spec: spec.clone(), encoder, decoder, head })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn check_input(&self, shape: [usize; 4]) -> Result<(), ModelError> {
        let [_, c, h, w] = shape;
        if c != self.spec.input_channels {
            return Err(ModelError::Shape(format!("expected {} input channel(s), got {c}", self.spec.input_channels)));
        }
        let m = self.spec.required_multiple();
        if h % m != 0 || w % m != 0 {
            return Err(ModelError::Shape(format!("input {h}x{w} must have height and width divisible by {m}")));
        }
        Ok(())
    }

    /// Pre-sigmoid scores, inference mode (running BN statistics).
    pub fn forward_logits(&self, x: &Tensor) -> Result<Tensor, ModelError> {
        self.check_input(x.shape())?;
        let mut skips: Vec<Tensor> = Vec::with_capacity(self.encoder.len());
        let mut h = x.clone();
        for stage in &self.encoder {
            for block in stage {
                h = block.forward(&h)?;
            }
            skips.push(h.clone());
        }
        skips.pop();
        let mut d = h;
        for (i, block) in self.decoder.iter().enumerate() {
            let skip = if i + 1 == self.decoder.len() { x } else { &skips[skips.len() - 1 - i] };
            d = block.forward(&d, skip)?;
        }
        drop(skips);
        Ok(self.head.forward(&d)?)
    }

    /// Cloud probabilities in (0, 1), same spatial size as the input.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor, ModelError> {
        let mut y = self.forward_logits(x)?;
        for v in y.data_mut() {
            *v = sigmoid(*v);
        }
        Ok(y)
    }

    /// Training-mode forward pass returning logits and the backward tape.
    /// A frozen encoder runs in inference mode and keeps its running statistics.
    pub fn forward_train(&mut self, x: &Tensor) -> Result<(Tensor, Tape), ModelError> {
        self.check_input(x.shape())?;
        let mode = NormMode::Train { momentum: BN_MOMENTUM };
        let frozen = self.encoder_frozen();
        let mut skips: Vec<Tensor> = Vec::with_capacity(self.encoder.len());
        let mut enc_caches = (!frozen).then(Vec::new);
        let mut h = x.clone();
        for stage in &mut self.encoder {
            let mut stage_caches = Vec::new();
            for block in stage.iter_mut() {
                if frozen {
                    h = block.forward(&h)?;
                } else {
                    let (y, c) = block.forward_train(h, mode)?;
                    stage_caches.push(c);
                    h = y;
                }
            }
            if let Some(ec) = enc_caches.as_mut() {
                ec.push(stage_caches);
            }
            skips.push(h.clone());
        }
        skips.pop();
        let n = self.decoder.len();
        let mut dec_caches = Vec::with_capacity(n);
        let mut d = h;
        for (i, block) in self.decoder.iter_mut().enumerate() {
            let skip = if i + 1 == n { x } else { &skips[skips.len() - 1 - i] };
            let (y, c) = block.forward_train(&d, skip, mode)?;
            dec_caches.push(c);
            d = y;
        }
        let (logits, head) = self.head.forward_train(d, mode)?;
        Ok((logits, Tape { encoder: enc_caches, decoder: dec_caches, head }))
    }

    /// Accumulates parameter gradients given d(loss)/d(logits).
    pub fn backward(&mut self, tape: Tape, grad_logits: &Tensor) -> Result<(), ModelError> {
        let Tape { encoder: enc_caches, decoder: mut dec_caches, head } = tape;
        let train_encoder = enc_caches.is_some();
        let n = self.decoder.len();
        let mut g = self.head.backward(head, grad_logits, true)?.expect("requested");
        // skip_grads[j]: gradient reaching the output of encoder stage j-1 via its skip
        let mut skip_grads: Vec<Option<Tensor>> = vec![None; n];
        for i in (0..n).rev() {
            let cache = dec_caches.pop().expect("one cache per decoder block");
            let j = n - 1 - i;
            let want_x = i > 0 || train_encoder;
            let want_skip = train_encoder && j > 0;
            let (gx, gs) = self.decoder[i].backward(cache, &g, want_x, want_skip)?;
            skip_grads[j] = gs;
            match gx {
                Some(gx) => g = gx,
                None => return Ok(()),
            }
        }
        let Some(mut enc_caches) = enc_caches else { return Ok(()) };
        for s in (0..self.encoder.len()).rev() {
            let mut stage_caches = enc_caches.pop().expect("one cache list per stage");
            for b in (0..self.encoder[s].len()).rev() {
                let cache = stage_caches.pop().expect("one cache per block");
                let want_input = s > 0 || b > 0;
                match self.encoder[s][b].backward(cache, &g, want_input)? {
                    Some(gx) => g = gx,
                    None => return Ok(()),
                }
            }
            if let Some(sg) = skip_grads[s].take() {
                g.add_assign(&sg)?;
            }
        }
        Ok(())
    }

    pub fn set_encoder_frozen(&mut self, frozen: bool) {
        for p in self.encoder_params_mut() {
            p.frozen = frozen;
        }
    }

    pub fn encoder_frozen(&self) -> bool {
        let mut ps = Vec::new();
        for block in self.encoder.iter().flatten() {
            block.dw.params(&mut ps);
            block.pw.params(&mut ps);
        }
        ps.iter().all(|p| p.frozen)
    }

    fn encoder_params_mut(&mut self) -> Vec<&mut Param> {
        let mut ps = Vec::new();
        for block in self.encoder.iter_mut().flatten() {
            block.dw.params_mut(&mut ps);
            block.pw.params_mut(&mut ps);
        }
        ps
    }

    /// All parameters in a fixed order (encoder, decoder, head).
    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut ps = Vec::new();
        for block in self.encoder.iter_mut().flatten() {
            block.dw.params_mut(&mut ps);
            block.pw.params_mut(&mut ps);
        }
        for block in &mut self.decoder {
            block.conv1.params_mut(&mut ps);
            block.conv2.params_mut(&mut ps);
        }
        self.head.params_mut(&mut ps);
        ps
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Number of learnable scalars (running statistics excluded).
    pub fn parameter_count(&mut self) -> usize {
        self.params_mut().iter().map(|p| p.value.len()).sum()
    }

    pub(crate) fn state(&self) -> Vec<StateRef<'_>> {
        let mut out = Vec::new();
        for (s, stage) in self.encoder.iter().enumerate() {
            for (b, block) in stage.iter().enumerate() {
                block.dw.state(&format!("enc.{s}.{b}.dw"), &mut out);
                block.pw.state(&format!("enc.{s}.{b}.pw"), &mut out);
            }
        }
        for (i, block) in self.decoder.iter().enumerate() {
            block.conv1.state(&format!("dec.{i}.conv1"), &mut out);
            block.conv2.state(&format!("dec.{i}.conv2"), &mut out);
        }
        self.head.state("head", &mut out);
        out
    }

    pub(crate) fn state_mut(&mut self) -> Vec<StateMut<'_>> {
        let mut out = Vec::new();
        for (s, stage) in self.encoder.iter_mut().enumerate() {
            for (b, block) in stage.iter_mut().enumerate() {
                block.dw.state_mut(&format!("enc.{s}.{b}.dw"), &mut out);
                block.pw.state_mut(&format!("enc.{s}.{b}.pw"), &mut out);
            }
        }
        for (i, block) in self.decoder.iter_mut().enumerate() {
            block.conv1.state_mut(&format!("dec.{i}.conv1"), &mut out);
            block.conv2.state_mut(&format!("dec.{i}.conv2"), &mut out);
        }
        self.head.state_mut("head", &mut out);
        out
    }

    fn digest_where(&self, keep: impl Fn(&str) -> bool) -> String {
        let mut h = Sha256::new();
        for s in self.state().into_iter().filter(|s| keep(&s.name)) {
            h.update(s.name.as_bytes());
            for v in s.data {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    /// SHA-256 over every encoder parameter and running statistic.
    pub fn encoder_digest(&self) -> String {
        self.digest_where(|n| n.starts_with("enc."))
    }

    /// SHA-256 over the complete model state.
    pub fn state_digest(&self) -> String {
        self.digest_where(|_| true)
    }

    /// Upper bound on the bytes of activations alive during one inference
    /// forward pass of a `batch`×`h`×`w` input (every intermediate counted as
    /// if simultaneously resident), plus conv scratch.
    pub fn activation_bytes(&self, batch: usize, h: usize, w: usize) -> usize {
        let mut elems = 0usize;
        let (mut ch, mut hh, mut ww) = (self.spec.input_channels, h, w);
        elems += ch * hh * ww;
        let mut skip_dims = vec![(ch, hh, ww)];
        for (i, st) in self.spec.encoder.iter().enumerate() {
            for b in 0..st.blocks {
                let stride = if b == 0 { st.stride } else { 1 };
                hh = hh.div_ceil(stride);
                ww = ww.div_ceil(stride);
                elems += ch * hh * ww; // depthwise output
                ch = st.out_channels;
                elems += ch * hh * ww; // pointwise output
            }
            elems += ch * hh * ww; // retained skip copy
            if i + 1 < self.spec.encoder.len() {
                skip_dims.push((ch, hh, ww));
            }
        }
        for &out_c in &self.spec.decoder {
            let (sc, sh, sw) = skip_dims.pop().expect("one skip per decoder stage");
            elems += ch * sh * sw; // upsampled
            elems += (ch + sc) * sh * sw; // concat
            elems += 2 * out_c * sh * sw; // two convs
            ch = out_c;
            hh = sh;
            ww = sw;
        }
        elems += hh * ww; // head
        let scratch = (1usize << 18) * std::mem::size_of::<f32>();
        batch * elems * std::mem::size_of::<f32>() + scratch
    }
}
