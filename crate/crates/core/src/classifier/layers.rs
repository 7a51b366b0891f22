//! Layers with explicit forward caches and hand-written backward passes.
//! Activations are row-major batches: `[rows, features]` for dense layers
//! and `[batch, C, H, W]` for convolutions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::ops::{
    attention, col2im, gather_head, gelu, gelu_grad, im2col, maxpool_kernel, scatter_head, ConvGeometry,
};
use super::scalar::{matmul, Scalar};
use super::tensor::Tensor;

/// A trainable tensor and its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T: Scalar> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
}

impl<T: Scalar> Param<T> {
    pub fn new(name: impl Into<String>, value: Tensor<T>) -> Self {
        let grad = Tensor::zeros(value.shape().to_vec());
        Self {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    /// Dropout active; masks derive from `seed`.
    Train { seed: u64 },
}

pub enum Init {
    /// `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`
    HeUniform,
    /// Normal(0, sigma) resampled outside two sigma.
    TruncNormal(f64),
    Zeros,
}

pub fn init_tensor<T: Scalar>(shape: Vec<usize>, fan_in: usize, init: Init, rng: &mut ChaCha8Rng) -> Tensor<T> {
    let n: usize = shape.iter().product();
    let data: Vec<T> = match init {
        Init::HeUniform => {
            let limit = (6.0 / fan_in.max(1) as f64).sqrt();
            (0..n).map(|_| T::lit(rng.gen_range(-limit..limit))).collect()
        }
        Init::TruncNormal(sigma) => {
            let normal = Normal::new(0.0, sigma).expect("sigma > 0");
            (0..n)
                .map(|_| loop {
                    let v: f64 = normal.sample(rng);
                    if v.abs() <= 2.0 * sigma {
                        break T::lit(v);
                    }
                })
                .collect()
        }
        Init::Zeros => vec![T::zero(); n],
    };
    Tensor::from_parts(shape, data)
}

/// `y = x W + b`, `W: [in, out]`.
#[derive(Debug, Clone)]
pub struct Linear<T: Scalar> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    input: Vec<T>,
}

impl<T: Scalar> Linear<T> {
    pub fn new(name: &str, fan_in: usize, fan_out: usize, init: Init, rng: &mut ChaCha8Rng) -> Self {
        Self {
            weight: Param::new(
                format!("{name}.weight"),
                init_tensor(vec![fan_in, fan_out], fan_in, init, rng),
            ),
            bias: Param::new(format!("{name}.bias"), Tensor::zeros(vec![fan_out])),
            input: Vec::new(),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn fan_out(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn forward(&mut self, x: &[T]) -> Vec<T> {
        let (i, o) = (self.fan_in(), self.fan_out());
        let rows = x.len() / i;
        let mut y = Vec::with_capacity(rows * o);
        for _ in 0..rows {
            y.extend_from_slice(self.bias.value.data());
        }
        matmul(x, self.weight.value.data(), &mut y, rows, i, o, false, false, true);
        self.input = x.to_vec();
        y
    }

    pub fn backward(&mut self, dy: &[T]) -> Vec<T> {
        let (i, o) = (self.fan_in(), self.fan_out());
        let rows = dy.len() / o;
        matmul(&self.input, dy, self.weight.grad.data_mut(), i, rows, o, true, false, true);
        let db = self.bias.grad.data_mut();
        for row in dy.chunks(o) {
            for (g, &d) in db.iter_mut().zip(row) {
                *g += d;
            }
        }
        let mut dx = vec![T::zero(); rows * i];
        matmul(dy, self.weight.value.data(), &mut dx, rows, o, i, false, true, false);
        dx
    }

    pub fn params_mut(&mut self) -> [&mut Param<T>; 2] {
        [&mut self.weight, &mut self.bias]
    }
}

/// 3x3-style convolution with zero padding, stride 1 or more.
#[derive(Debug, Clone)]
pub struct Conv2d<T: Scalar> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    pub geometry: ConvGeometry,
    out_hw: (usize, usize),
    cols: Vec<T>,
}

impl<T: Scalar> Conv2d<T> {
    pub fn new(name: &str, geometry: ConvGeometry, out_channels: usize, rng: &mut ChaCha8Rng) -> Self {
        let out_hw = geometry.output_dims().expect("valid convolution geometry");
        let fan_in = geometry.patch_len();
        Self {
            weight: Param::new(
                format!("{name}.weight"),
                init_tensor(
                    vec![out_channels, geometry.channels, geometry.kh, geometry.kw],
                    fan_in,
                    Init::HeUniform,
                    rng,
                ),
            ),
            bias: Param::new(format!("{name}.bias"), Tensor::zeros(vec![out_channels])),
            geometry,
            out_hw,
            cols: Vec::new(),
        }
    }

    pub fn out_channels(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn out_shape(&self) -> (usize, usize, usize) {
        (self.out_channels(), self.out_hw.0, self.out_hw.1)
    }

    pub fn forward(&mut self, x: &[T]) -> Vec<T> {
        let g = self.geometry;
        let in_len = g.channels * g.height * g.width;
        let batch = x.len() / in_len;
        let npix = self.out_hw.0 * self.out_hw.1;
        let plen = g.patch_len();
        let k = self.out_channels();
        self.cols = vec![T::zero(); batch * plen * npix];
        let mut y = vec![T::zero(); batch * k * npix];
        for b in 0..batch {
            let cols = &mut self.cols[b * plen * npix..(b + 1) * plen * npix];
            im2col(&x[b * in_len..(b + 1) * in_len], &g, self.out_hw, cols);
            let out = &mut y[b * k * npix..(b + 1) * k * npix];
            for (ch, &bias) in self.bias.value.data().iter().enumerate() {
                out[ch * npix..(ch + 1) * npix].fill(bias);
            }
            matmul(self.weight.value.data(), cols, out, k, plen, npix, false, false, true);
        }
        y
    }

    pub fn backward(&mut self, dy: &[T]) -> Vec<T> {
        let g = self.geometry;
        let in_len = g.channels * g.height * g.width;
        let npix = self.out_hw.0 * self.out_hw.1;
        let plen = g.patch_len();
        let k = self.out_channels();
        let batch = dy.len() / (k * npix);
        let mut dx = vec![T::zero(); batch * in_len];
        let mut dcols = vec![T::zero(); plen * npix];
        for b in 0..batch {
            let cols = &self.cols[b * plen * npix..(b + 1) * plen * npix];
            let dyb = &dy[b * k * npix..(b + 1) * k * npix];
            matmul(dyb, cols, self.weight.grad.data_mut(), k, npix, plen, false, true, true);
            for (ch, g) in self.bias.grad.data_mut().iter_mut().enumerate() {
                *g += dyb[ch * npix..(ch + 1) * npix].iter().copied().sum::<T>();
            }
            matmul(self.weight.value.data(), dyb, &mut dcols, plen, k, npix, true, false, false);
            col2im(&dcols, &g, self.out_hw, &mut dx[b * in_len..(b + 1) * in_len]);
        }
        dx
    }

    pub fn params_mut(&mut self) -> [&mut Param<T>; 2] {
        [&mut self.weight, &mut self.bias]
    }
}

#[derive(Debug, Clone, Default)]
pub struct Relu {
    active: Vec<bool>,
}

impl Relu {
    pub fn forward<T: Scalar>(&mut self, mut x: Vec<T>) -> Vec<T> {
        self.active = x.iter().map(|&v| v > T::zero()).collect();
        for v in &mut x {
            if *v <= T::zero() {
                *v = T::zero();
            }
        }
        x
    }

    /// Which inputs were positive in the last forward pass.
    pub fn pattern(&self) -> &[bool] {
        &self.active
    }

    pub fn backward<T: Scalar>(&self, mut dy: Vec<T>) -> Vec<T> {
        for (d, &on) in dy.iter_mut().zip(&self.active) {
            if !on {
                *d = T::zero();
            }
        }
        dy
    }
}

#[derive(Debug, Clone)]
pub struct Gelu<T: Scalar> {
    input: Vec<T>,
}

impl<T: Scalar> Default for Gelu<T> {
    fn default() -> Self {
        Self { input: Vec::new() }
    }
}

impl<T: Scalar> Gelu<T> {
    pub fn forward(&mut self, x: Vec<T>) -> Vec<T> {
        let y = x.iter().map(|&v| gelu(v)).collect();
        self.input = x;
        y
    }

    pub fn backward(&self, mut dy: Vec<T>) -> Vec<T> {
        for (d, &x) in dy.iter_mut().zip(&self.input) {
            *d *= gelu_grad(x);
        }
        dy
    }
}

/// Non-overlapping max pooling over `[batch, C, H, W]`.
#[derive(Debug, Clone)]
pub struct MaxPool {
    pub size: usize,
    pub in_shape: (usize, usize, usize),
    argmax: Vec<usize>,
}

impl MaxPool {
    pub fn new(size: usize, in_shape: (usize, usize, usize)) -> Self {
        Self {
            size,
            in_shape,
            argmax: Vec::new(),
        }
    }

    pub fn out_shape(&self) -> (usize, usize, usize) {
        let (c, h, w) = self.in_shape;
        (c, h / self.size, w / self.size)
    }

    pub fn forward<T: Scalar>(&mut self, x: &[T]) -> Vec<T> {
        let (c, h, w) = self.in_shape;
        let in_len = c * h * w;
        let (oc, oh, ow) = self.out_shape();
        let out_len = oc * oh * ow;
        let batch = x.len() / in_len;
        let mut y = vec![T::zero(); batch * out_len];
        self.argmax = vec![0; batch * out_len];
        for b in 0..batch {
            maxpool_kernel(
                &x[b * in_len..(b + 1) * in_len],
                self.in_shape,
                self.size,
                &mut y[b * out_len..(b + 1) * out_len],
                &mut self.argmax[b * out_len..(b + 1) * out_len],
            );
            for a in &mut self.argmax[b * out_len..(b + 1) * out_len] {
                *a += b * in_len;
            }
        }
        y
    }

    /// Winning input index of every window in the last forward pass.
    pub fn pattern(&self) -> &[usize] {
        &self.argmax
    }

    pub fn backward<T: Scalar>(&self, dy: &[T]) -> Vec<T> {
        let (c, h, w) = self.in_shape;
        let batch = dy.len() / (c * (h / self.size) * (w / self.size));
        let mut dx = vec![T::zero(); batch * c * h * w];
        for (&d, &i) in dy.iter().zip(&self.argmax) {
            dx[i] += d;
        }
        dx
    }
}

/// Per-row normalization with learned scale and shift.
#[derive(Debug, Clone)]
pub struct LayerNorm<T: Scalar> {
    pub gamma: Param<T>,
    pub beta: Param<T>,
    eps: T,
    xhat: Vec<T>,
    inv_std: Vec<T>,
}

impl<T: Scalar> LayerNorm<T> {
    pub fn new(name: &str, width: usize) -> Self {
        Self {
            gamma: Param::new(format!("{name}.gamma"), Tensor::filled(vec![width], T::one())),
            beta: Param::new(format!("{name}.beta"), Tensor::zeros(vec![width])),
            eps: T::lit(1e-6),
            xhat: Vec::new(),
            inv_std: Vec::new(),
        }
    }

    fn width(&self) -> usize {
        self.gamma.value.len()
    }

    pub fn forward(&mut self, x: &[T]) -> Vec<T> {
        let d = self.width();
        let n = T::from_usize(d).expect("width");
        let rows = x.len() / d;
        self.xhat = vec![T::zero(); x.len()];
        self.inv_std = vec![T::zero(); rows];
        let mut y = vec![T::zero(); x.len()];
        let (gamma, beta) = (self.gamma.value.data(), self.beta.value.data());
        for r in 0..rows {
            let row = &x[r * d..(r + 1) * d];
            let mean = row.iter().copied().sum::<T>() / n;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
            let inv = T::one() / (var + self.eps).sqrt();
            self.inv_std[r] = inv;
            for j in 0..d {
                let xh = (row[j] - mean) * inv;
                self.xhat[r * d + j] = xh;
                y[r * d + j] = gamma[j] * xh + beta[j];
            }
        }
        y
    }

    pub fn backward(&mut self, dy: &[T]) -> Vec<T> {
        let d = self.width();
        let n = T::from_usize(d).expect("width");
        let rows = dy.len() / d;
        let mut dx = vec![T::zero(); dy.len()];
        let gamma = self.gamma.value.data().to_vec();
        let (dgamma, dbeta) = (self.gamma.grad.data_mut(), self.beta.grad.data_mut());
        for r in 0..rows {
            let xh = &self.xhat[r * d..(r + 1) * d];
            let g = &dy[r * d..(r + 1) * d];
            let mut sum_dxh = T::zero();
            let mut sum_dxh_xh = T::zero();
            for j in 0..d {
                dgamma[j] += g[j] * xh[j];
                dbeta[j] += g[j];
                let dxh = g[j] * gamma[j];
                sum_dxh += dxh;
                sum_dxh_xh += dxh * xh[j];
            }
            let inv = self.inv_std[r];
            for j in 0..d {
                let dxh = g[j] * gamma[j];
                dx[r * d + j] = inv / n * (n * dxh - sum_dxh - xh[j] * sum_dxh_xh);
            }
        }
        dx
    }

    pub fn params_mut(&mut self) -> [&mut Param<T>; 2] {
        [&mut self.gamma, &mut self.beta]
    }
}

/// Inverted dropout with masks drawn from `(seed, id)`.
#[derive(Debug, Clone)]
pub struct Dropout<T: Scalar> {
    pub rate: f64,
    pub id: u64,
    mask: Option<Vec<T>>,
}

impl<T: Scalar> Dropout<T> {
    pub fn new(rate: f64, id: u64) -> Self {
        Self { rate, id, mask: None }
    }

    pub fn forward(&mut self, mut x: Vec<T>, mode: Mode) -> Vec<T> {
        match mode {
            Mode::Train { seed } if self.rate > 0.0 => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ self.id.wrapping_mul(0x9E37_79B9_7F4A_7C15));
                let keep = T::lit(1.0 / (1.0 - self.rate));
                let mask: Vec<T> = (0..x.len())
                    .map(|_| if rng.gen::<f64>() < self.rate { T::zero() } else { keep })
                    .collect();
                for (v, &m) in x.iter_mut().zip(&mask) {
                    *v *= m;
                }
                self.mask = Some(mask);
                x
            }
            _ => {
                self.mask = None;
                x
            }
        }
    }

    pub fn backward(&self, mut dy: Vec<T>) -> Vec<T> {
        if let Some(mask) = &self.mask {
            for (d, &m) in dy.iter_mut().zip(mask) {
                *d *= m;
            }
        }
        dy
    }
}

/// Multi-head self-attention over `[batch * tokens, d]` rows, with a fused
/// `d -> 3d` query/key/value projection and a `d -> d` output projection.
#[derive(Debug, Clone)]
pub struct Mhsa<T: Scalar> {
    pub qkv: Linear<T>,
    pub out: Linear<T>,
    pub heads: usize,
    pub tokens: usize,
    qkv_cache: Vec<T>,
    probs: Vec<T>,
}

impl<T: Scalar> Mhsa<T> {
    pub fn new(name: &str, d: usize, heads: usize, tokens: usize, sigma: f64, rng: &mut ChaCha8Rng) -> Self {
        Self {
            qkv: Linear::new(&format!("{name}.qkv"), d, 3 * d, Init::TruncNormal(sigma), rng),
            out: Linear::new(&format!("{name}.out"), d, d, Init::TruncNormal(sigma), rng),
            heads,
            tokens,
            qkv_cache: Vec::new(),
            probs: Vec::new(),
        }
    }

    fn width(&self) -> usize {
        self.out.fan_in()
    }

    fn split(qkv: &[T], tokens: usize, d: usize) -> (Vec<T>, Vec<T>, Vec<T>) {
        let mut q = Vec::with_capacity(tokens * d);
        let mut k = Vec::with_capacity(tokens * d);
        let mut v = Vec::with_capacity(tokens * d);
        for row in qkv.chunks(3 * d) {
            q.extend_from_slice(&row[..d]);
            k.extend_from_slice(&row[d..2 * d]);
            v.extend_from_slice(&row[2 * d..]);
        }
        (q, k, v)
    }

    pub fn forward(&mut self, x: &[T]) -> Vec<T> {
        let d = self.width();
        let t = self.tokens;
        let batch = x.len() / (t * d);
        let qkv = self.qkv.forward(x);
        let per_probs = self.heads * t * t;
        self.probs = vec![T::zero(); batch * per_probs];
        let mut att = vec![T::zero(); batch * t * d];
        for b in 0..batch {
            let (q, k, v) = Self::split(&qkv[b * t * 3 * d..(b + 1) * t * 3 * d], t, d);
            attention(
                &q,
                &k,
                &v,
                t,
                d,
                self.heads,
                &mut att[b * t * d..(b + 1) * t * d],
                &mut self.probs[b * per_probs..(b + 1) * per_probs],
            );
        }
        self.qkv_cache = qkv;
        self.out.forward(&att)
    }

    pub fn backward(&mut self, dy: &[T]) -> Vec<T> {
        let d = self.width();
        let t = self.tokens;
        let dh = d / self.heads;
        let batch = dy.len() / (t * d);
        let scale = T::one() / T::from_usize(dh).expect("head width").sqrt();
        let datt = self.out.backward(dy);
        let mut dqkv = vec![T::zero(); batch * t * 3 * d];
        let per_probs = self.heads * t * t;
        let buf = |n: usize| vec![T::zero(); n];
        let (mut qh, mut kh, mut vh, mut doh) = (buf(t * dh), buf(t * dh), buf(t * dh), buf(t * dh));
        let (mut dp, mut dqh, mut dkh, mut dvh) = (buf(t * t), buf(t * dh), buf(t * dh), buf(t * dh));
        for b in 0..batch {
            let (q, k, v) = Self::split(&self.qkv_cache[b * t * 3 * d..(b + 1) * t * 3 * d], t, d);
            let mut dq = vec![T::zero(); t * d];
            let mut dk = vec![T::zero(); t * d];
            let mut dv = vec![T::zero(); t * d];
            let datt_b = &datt[b * t * d..(b + 1) * t * d];
            for h in 0..self.heads {
                let p = &self.probs[b * per_probs + h * t * t..b * per_probs + (h + 1) * t * t];
                gather_head(&q, t, d, h, dh, &mut qh);
                gather_head(&k, t, d, h, dh, &mut kh);
                gather_head(&v, t, d, h, dh, &mut vh);
                gather_head(datt_b, t, d, h, dh, &mut doh);
                // dP = dO V^T, dV = P^T dO
                matmul(&doh, &vh, &mut dp, t, dh, t, false, true, false);
                matmul(p, &doh, &mut dvh, t, t, dh, true, false, false);
                // Softmax backward, then fold in the score scale.
                for (prow, drow) in p.chunks(t).zip(dp.chunks_mut(t)) {
                    let dot: T = prow.iter().zip(drow.iter()).map(|(&a, &b)| a * b).sum();
                    for (dv_, &pv) in drow.iter_mut().zip(prow) {
                        *dv_ = pv * (*dv_ - dot) * scale;
                    }
                }
                matmul(&dp, &kh, &mut dqh, t, t, dh, false, false, false);
                matmul(&dp, &qh, &mut dkh, t, t, dh, true, false, false);
                scatter_head(&dqh, t, d, h, dh, &mut dq);
                scatter_head(&dkh, t, d, h, dh, &mut dk);
                scatter_head(&dvh, t, d, h, dh, &mut dv);
            }
            let dst = &mut dqkv[b * t * 3 * d..(b + 1) * t * 3 * d];
            for (i, row) in dst.chunks_mut(3 * d).enumerate() {
                row[..d].copy_from_slice(&dq[i * d..(i + 1) * d]);
                row[d..2 * d].copy_from_slice(&dk[i * d..(i + 1) * d]);
                row[2 * d..].copy_from_slice(&dv[i * d..(i + 1) * d]);
            }
        }
        self.qkv.backward(&dqkv)
    }

    pub fn params_mut(&mut self) -> [&mut Param<T>; 4] {
        let [a, b] = self.qkv.params_mut();
        let [c, d] = self.out.params_mut();
        [a, b, c, d]
    }
}
