//! The adapted U-Net.
//!
//! Encoder level `k` has `base_filters * 2^k` filters and runs
//! `[conv3x3, PReLU, conv3x3, PReLU]`, with 2x2 max pooling between levels.
//! The decoder mirrors it: a 2x2 transposed convolution halves the filter
//! count, the matching encoder output is concatenated in front, and the same
//! double conv block follows. A 1x1 convolution produces one logit per pixel;
//! the sigmoid is applied by the loss / inference helpers.
//!
//! 3x3 convolutions use padding 1, so spatial size is preserved and inputs
//! must be divisible by `2^(depth - 1)`. Use [`Padding::to_multiple`] with
//! [`reflect_pad`] / [`crop`] for other sizes.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::activation::{prelu, prelu_backward, sigmoid};
use super::adam::ModelState;
use super::conv::{conv2d, conv2d_backward, upconv2, upconv2_backward};
use super::pool::{maxpool2, maxpool2_backward};
use super::scalar::Scalar;
use super::tensor::{concat_channels, split_channels, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UNetConfig {
    pub in_channels: usize,
    pub depth: usize,
    pub base_filters: usize,
    pub prelu_init: f64,
}

impl Default for UNetConfig {
    fn default() -> Self {
        Self {
            in_channels: 3,
            depth: 5,
            base_filters: 16,
            prelu_init: 0.25,
        }
    }
}

impl UNetConfig {
    pub fn filters(&self, level: usize) -> usize {
        self.base_filters << level
    }

    /// Spatial sizes must be multiples of this.
    pub fn input_multiple(&self) -> usize {
        1 << (self.depth - 1)
    }
}

/// Name and shape of one parameter tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: [usize; 4],
}

#[derive(Debug, Clone, Copy)]
struct BlockIdx {
    w1: usize,
    b1: usize,
    a1: usize,
    w2: usize,
    b2: usize,
    a2: usize,
}

#[derive(Debug, Clone, Copy)]
struct DecIdx {
    up_w: usize,
    up_b: usize,
    block: BlockIdx,
}

/// Network structure; parameters live in a [`ModelState`].
#[derive(Debug, Clone)]
pub struct UNet {
    cfg: UNetConfig,
    specs: Vec<ParamSpec>,
    enc: Vec<BlockIdx>,
    /// Indexed by level `0..depth-1`.
    dec: Vec<DecIdx>,
    head_w: usize,
    head_b: usize,
}

struct SpecBuilder(Vec<ParamSpec>);

impl SpecBuilder {
    fn push(&mut self, name: String, shape: [usize; 4]) -> usize {
        self.0.push(ParamSpec { name, shape });
        self.0.len() - 1
    }

    fn block(&mut self, prefix: &str, cin: usize, f: usize) -> BlockIdx {
        BlockIdx {
            w1: self.push(format!("{prefix}.conv1.weight"), [f, cin, 3, 3]),
            b1: self.push(format!("{prefix}.conv1.bias"), [1, f, 1, 1]),
            a1: self.push(format!("{prefix}.prelu1.slope"), [1, f, 1, 1]),
            w2: self.push(format!("{prefix}.conv2.weight"), [f, f, 3, 3]),
            b2: self.push(format!("{prefix}.conv2.bias"), [1, f, 1, 1]),
            a2: self.push(format!("{prefix}.prelu2.slope"), [1, f, 1, 1]),
        }
    }
}

struct BlockCache<T> {
    in1: Tensor<T>,
    pre1: Tensor<T>,
    in2: Tensor<T>,
    pre2: Tensor<T>,
}

/// Activations kept by [`UNet::forward`] for the backward pass.
pub struct ForwardCache<T> {
    enc: Vec<BlockCache<T>>,
    /// `(input shape, argmax)` of the pool feeding encoder level `k + 1`.
    pools: Vec<([usize; 4], Vec<u32>)>,
    /// `(upconv input, block)` per decoder level.
    dec: Vec<Option<(Tensor<T>, BlockCache<T>)>>,
    head_in: Tensor<T>,
}

impl<T: Scalar> ForwardCache<T> {
    /// Fingerprint of every PReLU branch and pooling choice. Two forward
    /// passes with equal signatures evaluate the same smooth branch.
    pub fn branch_signature(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |v: u64| {
            h ^= v;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        };
        let blocks = self
            .enc
            .iter()
            .chain(self.dec.iter().flatten().map(|(_, b)| b));
        for b in blocks {
            for t in [&b.pre1, &b.pre2] {
                for v in t.data() {
                    eat(u64::from(*v > T::zero()));
                }
            }
        }
        for (_, idx) in &self.pools {
            for &i in idx {
                eat(u64::from(i));
            }
        }
        h
    }
}

impl UNet {
    pub fn new(cfg: UNetConfig) -> Result<Self> {
        if cfg.depth < 2 || cfg.base_filters < 1 || cfg.in_channels < 1 || cfg.depth > 12 {
            return Err(Error::Config(format!("invalid U-Net config {cfg:?}")));
        }
        let mut b = SpecBuilder(Vec::new());
        let mut enc = Vec::with_capacity(cfg.depth);
        let mut cin = cfg.in_channels;
        for k in 0..cfg.depth {
            enc.push(b.block(&format!("enc{k}"), cin, cfg.filters(k)));
            cin = cfg.filters(k);
        }
        let mut dec: Vec<Option<DecIdx>> = (0..cfg.depth - 1).map(|_| None).collect();
        for k in (0..cfg.depth - 1).rev() {
            let f = cfg.filters(k);
            let up_w = b.push(format!("dec{k}.up.weight"), [cfg.filters(k + 1), f, 2, 2]);
            let up_b = b.push(format!("dec{k}.up.bias"), [1, f, 1, 1]);
            let block = b.block(&format!("dec{k}"), 2 * f, f);
            dec[k] = Some(DecIdx { up_w, up_b, block });
        }
        let head_w = b.push("head.weight".into(), [1, cfg.filters(0), 1, 1]);
        let head_b = b.push("head.bias".into(), [1, 1, 1, 1]);
        Ok(Self {
            cfg,
            specs: b.0,
            enc,
            dec: dec.into_iter().map(|d| d.expect("every level built")).collect(),
            head_w,
            head_b,
        })
    }

    pub fn config(&self) -> &UNetConfig {
        &self.cfg
    }

    pub fn param_specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn parameter_count(&self) -> usize {
        self.specs.iter().map(|s| s.shape.iter().product::<usize>()).sum()
    }

    /// He-normal weights, zero biases, PReLU slopes at `prelu_init`.
    pub fn init<T: Scalar, R: Rng + ?Sized>(&self, rng: &mut R) -> ModelState<T> {
        let a = self.cfg.prelu_init;
        let mut params = Vec::with_capacity(self.specs.len());
        for s in &self.specs {
            let n: usize = s.shape.iter().product();
            let data: Vec<T> = if s.name.ends_with(".slope") {
                alloc::vec![T::lit(a); n]
            } else if s.name.ends_with(".bias") {
                alloc::vec![T::zero(); n]
            } else {
                let fan_in = if s.name.contains(".up.") {
                    s.shape[0]
                } else {
                    s.shape[1] * s.shape[2] * s.shape[3]
                } as f64;
                let gain = if s.name.starts_with("head") || s.name.contains(".up.") {
                    1.0
                } else {
                    2.0 / (1.0 + a * a)
                };
                let normal = Normal::new(0.0, libm::sqrt(gain / fan_in)).expect("positive std");
                (0..n).map(|_| T::lit(normal.sample(rng))).collect()
            };
            params.push(Tensor::from_vec(s.shape, data).expect("spec shape"));
        }
        let names = self.specs.iter().map(|s| s.name.clone()).collect();
        ModelState::new(names, params).expect("one name per parameter")
    }

    fn check_params<T: Scalar>(&self, params: &[Tensor<T>]) -> Result<()> {
        if params.len() != self.specs.len() {
            return Err(Error::Shape(format!(
                "{} parameter tensors, network has {}",
                params.len(),
                self.specs.len()
            )));
        }
        for (p, s) in params.iter().zip(&self.specs) {
            if p.shape() != s.shape {
                return Err(Error::Shape(format!(
                    "{} has shape {:?}, expected {:?}",
                    s.name,
                    p.shape(),
                    s.shape
                )));
            }
        }
        Ok(())
    }

    fn check_input<T: Scalar>(&self, x: &Tensor<T>) -> Result<()> {
        let m = self.cfg.input_multiple();
        if x.c() != self.cfg.in_channels {
            return Err(Error::Shape(format!(
                "input has {} channels, network expects {}",
                x.c(),
                self.cfg.in_channels
            )));
        }
        if x.h() % m != 0 || x.w() % m != 0 || x.h() == 0 || x.w() == 0 {
            return Err(Error::Shape(format!(
                "input {}x{} is not divisible by {m}",
                x.h(),
                x.w()
            )));
        }
        Ok(())
    }

    fn block_forward<T: Scalar>(
        &self,
        p: &[Tensor<T>],
        idx: BlockIdx,
        x: Tensor<T>,
        keep: bool,
    ) -> Result<(Tensor<T>, Option<BlockCache<T>>)> {
        let pre1 = conv2d(&x, &p[idx.w1], &p[idx.b1], 1, 1)?;
        pre1.check_finite("conv3x3")?;
        let in2 = prelu(&pre1, &p[idx.a1])?;
        let pre2 = conv2d(&in2, &p[idx.w2], &p[idx.b2], 1, 1)?;
        pre2.check_finite("conv3x3")?;
        let out = prelu(&pre2, &p[idx.a2])?;
        let cache = keep.then_some(BlockCache {
            in1: x,
            pre1,
            in2,
            pre2,
        });
        Ok((out, cache))
    }

    fn block_backward<T: Scalar>(
        &self,
        p: &[Tensor<T>],
        idx: BlockIdx,
        cache: &BlockCache<T>,
        d_out: &Tensor<T>,
        grads: &mut [Tensor<T>],
        need_input: bool,
    ) -> Result<Option<Tensor<T>>> {
        let (d_pre2, da2) = prelu_backward(&cache.pre2, &p[idx.a2], d_out)?;
        grads[idx.a2].add_assign(&da2)?;
        let g2 = conv2d_backward(&cache.in2, &p[idx.w2], 1, 1, &d_pre2, true)?;
        grads[idx.w2].add_assign(&g2.kernel)?;
        grads[idx.b2].add_assign(&g2.bias)?;
        let d_in2 = g2.input.expect("requested");
        let (d_pre1, da1) = prelu_backward(&cache.pre1, &p[idx.a1], &d_in2)?;
        grads[idx.a1].add_assign(&da1)?;
        let g1 = conv2d_backward(&cache.in1, &p[idx.w1], 1, 1, &d_pre1, need_input)?;
        grads[idx.w1].add_assign(&g1.kernel)?;
        grads[idx.b1].add_assign(&g1.bias)?;
        Ok(g1.input)
    }

    fn run<T: Scalar>(&self, params: &[Tensor<T>], x: &Tensor<T>, keep: bool) -> Result<(Tensor<T>, Option<ForwardCache<T>>)> {
        self.check_params(params)?;
        self.check_input(x)?;
        x.check_finite("input")?;
        let depth = self.cfg.depth;
        let mut enc_cache = Vec::new();
        let mut pools = Vec::new();
        let mut skips: Vec<Tensor<T>> = Vec::with_capacity(depth);
        let mut h = x.clone();
        for k in 0..depth {
            if k > 0 {
                let prev = skips.last().expect("level k-1 ran");
                let (pooled, argmax) = maxpool2(prev)?;
                if keep {
                    pools.push((prev.shape(), argmax));
                }
                h = pooled;
            }
            let (out, cache) = self.block_forward(params, self.enc[k], h, keep)?;
            enc_cache.extend(cache);
            skips.push(out.clone());
            h = out;
        }
        // Deepest level feeds the decoder directly and is not a skip.
        skips.pop();
        let mut dec_cache: Vec<Option<(Tensor<T>, BlockCache<T>)>> = (0..depth - 1).map(|_| None).collect();
        for k in (0..depth - 1).rev() {
            let d = self.dec[k];
            let up = upconv2(&h, &params[d.up_w], &params[d.up_b])?;
            up.check_finite("upconv2")?;
            let skip = skips.pop().expect("skip for every decoder level");
            let cat = concat_channels(&skip, &up)?;
            let (out, cache) = self.block_forward(params, d.block, cat, keep)?;
            if let Some(cache) = cache {
                dec_cache[k] = Some((h, cache));
            }
            h = out;
        }
        let logits = conv2d(&h, &params[self.head_w], &params[self.head_b], 0, 1)?;
        logits.check_finite("head")?;
        let cache = keep.then_some(ForwardCache {
            enc: enc_cache,
            pools,
            dec: dec_cache,
            head_in: h,
        });
        Ok((logits, cache))
    }

    /// Logits `(n, 1, h, w)` plus the cache needed by [`UNet::backward`].
    pub fn forward<T: Scalar>(&self, params: &[Tensor<T>], x: &Tensor<T>) -> Result<(Tensor<T>, ForwardCache<T>)> {
        let (logits, cache) = self.run(params, x, true)?;
        Ok((logits, cache.expect("cache requested")))
    }

    /// Logits without keeping activations.
    pub fn logits<T: Scalar>(&self, params: &[Tensor<T>], x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.run(params, x, false)?.0)
    }

    /// Sigmoid probabilities `(n, 1, h, w)`.
    pub fn predict<T: Scalar>(&self, params: &[Tensor<T>], x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(sigmoid(&self.logits(params, x)?))
    }

    /// Probabilities for inputs of any spatial size: reflect-pads to the
    /// pooling multiple and crops the output back.
    pub fn predict_any<T: Scalar>(&self, params: &[Tensor<T>], x: &Tensor<T>) -> Result<Tensor<T>> {
        let pad = Padding::to_multiple(x.h(), x.w(), self.cfg.input_multiple());
        let p = self.predict(params, &reflect_pad(x, pad))?;
        Ok(crop(&p, pad))
    }

    /// Parameter gradients given the gradient of the logits.
    pub fn backward<T: Scalar>(
        &self,
        params: &[Tensor<T>],
        cache: &ForwardCache<T>,
        d_logits: &Tensor<T>,
    ) -> Result<Vec<Tensor<T>>> {
        self.check_params(params)?;
        let mut grads: Vec<Tensor<T>> = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        let head = conv2d_backward(&cache.head_in, &params[self.head_w], 0, 1, d_logits, true)?;
        grads[self.head_w].add_assign(&head.kernel)?;
        grads[self.head_b].add_assign(&head.bias)?;
        let mut d = head.input.expect("requested");

        let depth = self.cfg.depth;
        let mut d_skips: Vec<Option<Tensor<T>>> = (0..depth - 1).map(|_| None).collect();
        for k in 0..depth - 1 {
            let dk = self.dec[k];
            let (up_in, block) = cache.dec[k].as_ref().ok_or_else(|| Error::Shape("decoder cache missing".into()))?;
            let d_cat = self
                .block_backward(params, dk.block, block, &d, &mut grads, true)?
                .expect("requested");
            let (d_skip, d_up) = split_channels(&d_cat, self.cfg.filters(k))?;
            d_skips[k] = Some(d_skip);
            let g = upconv2_backward(up_in, &params[dk.up_w], &d_up, true)?;
            grads[dk.up_w].add_assign(&g.kernel)?;
            grads[dk.up_b].add_assign(&g.bias)?;
            d = g.input.expect("requested");
        }
        // `d` is now the gradient of the deepest encoder output.
        for k in (0..depth).rev() {
            if k < depth - 1 {
                d.add_assign(d_skips[k].as_ref().expect("filled above"))?;
            }
            let d_in = self.block_backward(params, self.enc[k], &cache.enc[k], &d, &mut grads, k > 0)?;
            if k > 0 {
                let (shape, argmax) = &cache.pools[k - 1];
                d = maxpool2_backward(*shape, argmax, &d_in.expect("requested"))?;
            }
        }
        Ok(grads)
    }
}

/// Rows/columns added on each side of an input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Padding {
    pub top: usize,
    pub bottom: usize,
    pub left: usize,
    pub right: usize,
}

impl Padding {
    /// Smallest symmetric padding (extra row/column at the bottom/right)
    /// that makes `h` and `w` multiples of `m`.
    pub fn to_multiple(h: usize, w: usize, m: usize) -> Self {
        let split = |size: usize| {
            let total = size.div_ceil(m) * m - size;
            (total / 2, total - total / 2)
        };
        let (top, bottom) = split(h);
        let (left, right) = split(w);
        Self { top, bottom, left, right }
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::default()
    }
}

#[inline]
fn reflect_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    i = i.rem_euclid(period);
    (if i >= n { period - i } else { i }) as usize
}

/// Mirror padding without repeating the edge pixel.
pub fn reflect_pad<T: Scalar>(x: &Tensor<T>, pad: Padding) -> Tensor<T> {
    if pad.is_zero() {
        return x.clone();
    }
    let [n, c, h, w] = x.shape();
    let (ph, pw) = (h + pad.top + pad.bottom, w + pad.left + pad.right);
    let mut out = Vec::with_capacity(n * c * ph * pw);
    let src = x.data();
    for plane in 0..n * c {
        let base = plane * h * w;
        for r in 0..ph {
            let sr = reflect_index(r as isize - pad.top as isize, h);
            for col in 0..pw {
                let sc = reflect_index(col as isize - pad.left as isize, w);
                out.push(src[base + sr * w + sc]);
            }
        }
    }
    Tensor::from_vec([n, c, ph, pw], out).expect("padded shape")
}

/// Removes `pad` from every side.
pub fn crop<T: Scalar>(x: &Tensor<T>, pad: Padding) -> Tensor<T> {
    if pad.is_zero() {
        return x.clone();
    }
    let [n, c, ph, pw] = x.shape();
    let (h, w) = (ph - pad.top - pad.bottom, pw - pad.left - pad.right);
    let mut out = Vec::with_capacity(n * c * h * w);
    for plane in 0..n * c {
        let base = plane * ph * pw;
        for r in 0..h {
            let row = base + (r + pad.top) * pw + pad.left;
            out.extend_from_slice(&x.data()[row..row + w]);
        }
    }
    Tensor::from_vec([n, c, h, w], out).expect("cropped shape")
}

/// Adjoint of [`crop`]: places `x` inside a zero border.
pub fn uncrop<T: Scalar>(x: &Tensor<T>, pad: Padding) -> Tensor<T> {
    if pad.is_zero() {
        return x.clone();
    }
    let [n, c, h, w] = x.shape();
    let (ph, pw) = (h + pad.top + pad.bottom, w + pad.left + pad.right);
    let mut out = Tensor::zeros([n, c, ph, pw]);
    let d = out.data_mut();
    for plane in 0..n * c {
        for r in 0..h {
            let dst = plane * ph * pw + (r + pad.top) * pw + pad.left;
            let src = plane * h * w + r * w;
            d[dst..dst + w].copy_from_slice(&x.data()[src..src + w]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn output_shape_for_default_config() {
        let net = UNet::new(UNetConfig::default()).unwrap();
        let state = net.init::<f32, _>(&mut seeded(1));
        let x = Tensor::<f32>::filled([1, 3, 32, 32], 0.1);
        let y = net.logits(&state.params, &x).unwrap();
        assert_eq!(y.shape(), [1, 1, 32, 32]);
    }

    #[test]
    fn filter_widths_double_per_level() {
        let net = UNet::new(UNetConfig::default()).unwrap();
        let spec = |name: &str| net.param_specs().iter().find(|s| s.name == name).unwrap().shape;
        assert_eq!(spec("enc0.conv1.weight"), [16, 3, 3, 3]);
        assert_eq!(spec("enc4.conv2.weight"), [256, 256, 3, 3]);
        assert_eq!(spec("dec3.up.weight"), [256, 128, 2, 2]);
        assert_eq!(spec("dec0.conv1.weight"), [16, 32, 3, 3]);
        assert_eq!(spec("head.weight"), [1, 16, 1, 1]);
    }

    #[test]
    fn indivisible_input_rejected() {
        let net = UNet::new(UNetConfig::default()).unwrap();
        let state = net.init::<f32, _>(&mut seeded(1));
        let x = Tensor::<f32>::zeros([1, 3, 300, 300]);
        assert!(matches!(net.logits(&state.params, &x), Err(Error::Shape(_))));
        assert!(UNet::new(UNetConfig { depth: 1, ..UNetConfig::default() }).is_err());
    }

    #[test]
    fn padding_to_304() {
        let p = Padding::to_multiple(300, 300, 16);
        assert_eq!(p, Padding { top: 2, bottom: 2, left: 2, right: 2 });
        let p = Padding::to_multiple(301, 64, 16);
        assert_eq!(p, Padding { top: 1, bottom: 2, left: 0, right: 0 });
    }

    #[test]
    fn reflect_pad_then_crop_is_identity() {
        let x = Tensor::from_vec([1, 1, 3, 4], (0..12).map(|v| v as f32).collect()).unwrap();
        let pad = Padding { top: 2, bottom: 1, left: 1, right: 2 };
        let p = reflect_pad(&x, pad);
        assert_eq!(p.shape(), [1, 1, 6, 7]);
        // row -2 mirrors row 2; column -1 mirrors column 1
        assert_eq!(p.data()[0], 9.0);
        assert_eq!(crop(&p, pad), x);
        let u = uncrop(&x, pad);
        assert_eq!(crop(&u, pad), x);
        assert_eq!(u.data().iter().sum::<f32>(), x.data().iter().sum::<f32>());
    }
}
