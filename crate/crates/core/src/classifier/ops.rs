//! Numeric kernels shared by the layers, plus tensor-level entry points.

use super::scalar::{matmul, Scalar};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::imaging::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeometry {
    pub fn output_dims(&self) -> Result<(usize, usize)> {
        if self.kh % 2 == 0 || self.kw % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "kernel {}x{} must have odd sides",
                self.kh, self.kw
            )));
        }
        if self.stride == 0 {
            return Err(Error::InvalidArgument("stride must be >= 1".into()));
        }
        let dim = |size: usize, k: usize| -> Result<usize> {
            let span = (size + 2 * self.pad)
                .checked_sub(k)
                .ok_or_else(|| Error::InvalidArgument(format!("kernel {k} larger than padded input {size}")))?;
            if span % self.stride != 0 {
                return Err(Error::InvalidArgument(format!(
                    "({size} + 2*{} - {k}) is not divisible by stride {}",
                    self.pad, self.stride
                )));
            }
            Ok(span / self.stride + 1)
        };
        Ok((dim(self.height, self.kh)?, dim(self.width, self.kw)?))
    }

    pub fn patch_len(&self) -> usize {
        self.channels * self.kh * self.kw
    }
}

/// Unfold `input` (`[C, H, W]`) into `cols` (`[C*kh*kw, H'*W']`).
pub fn im2col<T: Scalar>(input: &[T], g: &ConvGeometry, out_hw: (usize, usize), cols: &mut [T]) {
    let (oh, ow) = out_hw;
    let npix = oh * ow;
    debug_assert_eq!(cols.len(), g.patch_len() * npix);
    for c in 0..g.channels {
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (c * g.kh + ki) * g.kw + kj;
                let dst = &mut cols[row * npix..(row + 1) * npix];
                for oy in 0..oh {
                    let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                    for ox in 0..ow {
                        let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                        dst[oy * ow + ox] = if iy >= 0 && ix >= 0 && (iy as usize) < g.height && (ix as usize) < g.width {
                            input[(c * g.height + iy as usize) * g.width + ix as usize]
                        } else {
                            T::zero()
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-add `cols` back into `grad_input`.
pub fn col2im<T: Scalar>(cols: &[T], g: &ConvGeometry, out_hw: (usize, usize), grad_input: &mut [T]) {
    let (oh, ow) = out_hw;
    let npix = oh * ow;
    for c in 0..g.channels {
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (c * g.kh + ki) * g.kw + kj;
                let src = &cols[row * npix..(row + 1) * npix];
                for oy in 0..oh {
                    let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                    if iy < 0 || iy as usize >= g.height {
                        continue;
                    }
                    for ox in 0..ow {
                        let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                        if ix >= 0 && (ix as usize) < g.width {
                            grad_input[(c * g.height + iy as usize) * g.width + ix as usize] += src[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }
}

/// Zero-padded cross-correlation of `input` (`[C, H, W]`) with `kernels`
/// (`[K, C, kh, kw]`).
pub fn conv2d<T: Scalar>(input: &Tensor<T>, kernels: &Tensor<T>, stride: usize, pad: usize) -> Result<Tensor<T>> {
    let (&[c, h, w], &[k, kc, kh, kw]) = (input.shape(), kernels.shape()) else {
        return Err(Error::DimensionMismatch(format!(
            "conv2d expects [C,H,W] and [K,C,kh,kw], got {:?} and {:?}",
            input.shape(),
            kernels.shape()
        )));
    };
    if c != kc {
        return Err(Error::DimensionMismatch(format!("input has {c} channels, kernels expect {kc}")));
    }
    let g = ConvGeometry {
        channels: c,
        height: h,
        width: w,
        kh,
        kw,
        stride,
        pad,
    };
    let (oh, ow) = g.output_dims()?;
    let mut cols = vec![T::zero(); g.patch_len() * oh * ow];
    im2col(input.data(), &g, (oh, ow), &mut cols);
    let mut out = vec![T::zero(); k * oh * ow];
    matmul(kernels.data(), &cols, &mut out, k, g.patch_len(), oh * ow, false, false, false);
    Ok(Tensor::from_parts(vec![k, oh, ow], out))
}

/// Non-overlapping `size x size` max pooling of `[C, H, W]` data. `argmax`
/// receives the flat input index of each output's maximum.
pub fn maxpool_kernel<T: Scalar>(
    input: &[T],
    (c, h, w): (usize, usize, usize),
    size: usize,
    out: &mut [T],
    argmax: &mut [usize],
) {
    let (oh, ow) = (h / size, w / size);
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = (ch * h + oy * size) * w + ox * size;
                for dy in 0..size {
                    for dx in 0..size {
                        let i = (ch * h + oy * size + dy) * w + ox * size + dx;
                        if input[i] > input[best] {
                            best = i;
                        }
                    }
                }
                let o = (ch * oh + oy) * ow + ox;
                out[o] = input[best];
                argmax[o] = best;
            }
        }
    }
}

pub fn maxpool<T: Scalar>(input: &Tensor<T>, size: usize) -> Result<Tensor<T>> {
    let &[c, h, w] = input.shape() else {
        return Err(Error::DimensionMismatch(format!("maxpool expects [C,H,W], got {:?}", input.shape())));
    };
    if size == 0 || h % size != 0 || w % size != 0 {
        return Err(Error::InvalidArgument(format!("{h}x{w} input is not divisible into {size}x{size} windows")));
    }
    let n = c * (h / size) * (w / size);
    let mut out = vec![T::zero(); n];
    let mut arg = vec![0; n];
    maxpool_kernel(input.data(), (c, h, w), size, &mut out, &mut arg);
    Ok(Tensor::from_parts(vec![c, h / size, w / size], out))
}

/// Max-subtracted softmax of one row, in place.
pub fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let mut p = logits.to_vec();
    softmax_in_place(&mut p);
    p
}

/// Cross-entropy of `softmax(logits)` against `target`, and its gradient
/// `p - onehot(target)` with respect to the logits.
pub fn softmax_xent<T: Scalar>(logits: &[T], target: usize) -> Result<(T, Vec<T>)> {
    if target >= logits.len() {
        return Err(Error::InvalidArgument(format!(
            "target {target} outside {} classes",
            logits.len()
        )));
    }
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let log_sum = logits.iter().map(|&v| (v - max).exp()).sum::<T>().ln() + max;
    let loss = log_sum - logits[target];
    let mut grad: Vec<T> = logits.iter().map(|&v| (v - log_sum).exp()).collect();
    grad[target] -= T::one();
    Ok((loss, grad))
}

/// Side length after zero-padding `side` up to a multiple of `patch`.
pub fn padded_side(side: usize, patch: usize) -> usize {
    side.div_ceil(patch) * patch
}

/// Split a `side x side` image into row-major flattened patches, zero-padding
/// the right and bottom edges. Output is `[num_patches, patch * patch]`.
pub fn patchify_values<T: Scalar>(values: &[T], side: usize, patch: usize) -> Result<Tensor<T>> {
    if values.len() != side * side {
        return Err(Error::DimensionMismatch(format!(
            "{} values do not form a {side}x{side} image",
            values.len()
        )));
    }
    if patch == 0 || patch > padded_side(side, patch.max(1)) || side == 0 {
        return Err(Error::InvalidArgument(format!("patch {patch} does not fit a {side}px image")));
    }
    let grid = padded_side(side, patch) / patch;
    let plen = patch * patch;
    let mut out = vec![T::zero(); grid * grid * plen];
    for py in 0..grid {
        for px in 0..grid {
            let base = (py * grid + px) * plen;
            for dy in 0..patch {
                let y = py * patch + dy;
                if y >= side {
                    break;
                }
                for dx in 0..patch {
                    let x = px * patch + dx;
                    if x < side {
                        out[base + dy * patch + dx] = values[y * side + x];
                    }
                }
            }
        }
    }
    Ok(Tensor::from_parts(vec![grid * grid, plen], out))
}

/// Patches of a square mask with foreground scaled to 1.
pub fn patchify(mask: &BinaryMask, patch: usize) -> Result<Tensor<f32>> {
    if mask.width() != mask.height() {
        return Err(Error::DimensionMismatch(format!(
            "patchify needs a square mask, got {}x{}",
            mask.width(),
            mask.height()
        )));
    }
    let side = mask.width();
    if patch > padded_side(side, patch.max(1)) || patch == 0 {
        return Err(Error::InvalidArgument(format!("patch {patch} larger than {side}px mask")));
    }
    patchify_values(&mask_values::<f32>(mask), side, patch)
}

/// Mask pixels as `{0, 1}` values in raster order.
pub fn mask_values<T: Scalar>(mask: &BinaryMask) -> Vec<T> {
    mask.data()
        .iter()
        .map(|&v| if v != 0 { T::one() } else { T::zero() })
        .collect()
}

/// Scaled dot-product attention for one sequence. `q`, `k`, `v` and `out`
/// are `[T, d]`; `probs` receives the per-head `[T, T]` attention rows.
pub fn attention<T: Scalar>(
    q: &[T],
    k: &[T],
    v: &[T],
    tokens: usize,
    d: usize,
    heads: usize,
    out: &mut [T],
    probs: &mut [T],
) {
    let dh = d / heads;
    let scale = T::one() / T::from_usize(dh).expect("head width").sqrt();
    let mut qh = vec![T::zero(); tokens * dh];
    let mut kh = vec![T::zero(); tokens * dh];
    let mut vh = vec![T::zero(); tokens * dh];
    let mut oh = vec![T::zero(); tokens * dh];
    for h in 0..heads {
        gather_head(q, tokens, d, h, dh, &mut qh);
        gather_head(k, tokens, d, h, dh, &mut kh);
        gather_head(v, tokens, d, h, dh, &mut vh);
        let p = &mut probs[h * tokens * tokens..(h + 1) * tokens * tokens];
        matmul(&qh, &kh, p, tokens, dh, tokens, false, true, false);
        for row in p.chunks_mut(tokens) {
            row.iter_mut().for_each(|s| *s *= scale);
            softmax_in_place(row);
        }
        matmul(p, &vh, &mut oh, tokens, tokens, dh, false, false, false);
        scatter_head(&oh, tokens, d, h, dh, out);
    }
}

pub(crate) fn gather_head<T: Scalar>(x: &[T], tokens: usize, d: usize, h: usize, dh: usize, out: &mut [T]) {
    for t in 0..tokens {
        out[t * dh..(t + 1) * dh].copy_from_slice(&x[t * d + h * dh..t * d + (h + 1) * dh]);
    }
}

pub(crate) fn scatter_head<T: Scalar>(x: &[T], tokens: usize, d: usize, h: usize, dh: usize, out: &mut [T]) {
    for t in 0..tokens {
        out[t * d + h * dh..t * d + (h + 1) * dh].copy_from_slice(&x[t * dh..(t + 1) * dh]);
    }
}

/// Multi-head self-attention over `x` (`[T, d]`) with `[d, d]` projection
/// matrices applied as `x W`. Returns the output and the attention weights
/// (`[heads, T, T]`).
pub fn mhsa<T: Scalar>(
    x: &Tensor<T>,
    heads: usize,
    wq: &Tensor<T>,
    wk: &Tensor<T>,
    wv: &Tensor<T>,
    wo: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let &[tokens, d] = x.shape() else {
        return Err(Error::DimensionMismatch(format!("mhsa expects [T,d], got {:?}", x.shape())));
    };
    if heads == 0 || d % heads != 0 {
        return Err(Error::InvalidArgument(format!("{heads} heads do not divide width {d}")));
    }
    for w in [wq, wk, wv, wo] {
        if w.shape() != [d, d] {
            return Err(Error::DimensionMismatch(format!("projection {:?} is not [{d},{d}]", w.shape())));
        }
    }
    let project = |w: &Tensor<T>| {
        let mut y = vec![T::zero(); tokens * d];
        matmul(x.data(), w.data(), &mut y, tokens, d, d, false, false, false);
        y
    };
    let (q, k, v) = (project(wq), project(wk), project(wv));
    let mut att = vec![T::zero(); tokens * d];
    let mut probs = vec![T::zero(); heads * tokens * tokens];
    attention(&q, &k, &v, tokens, d, heads, &mut att, &mut probs);
    let mut out = vec![T::zero(); tokens * d];
    matmul(&att, wo.data(), &mut out, tokens, d, d, false, false, false);
    Ok((
        Tensor::from_parts(vec![tokens, d], out),
        Tensor::from_parts(vec![heads, tokens, tokens], probs),
    ))
}

const GELU_C: f64 = 0.044_715;

/// GeLU, tanh approximation.
pub fn gelu<T: Scalar>(x: T) -> T {
    let c = T::lit((2.0 / std::f64::consts::PI).sqrt());
    let half = T::lit(0.5);
    half * x * (T::one() + (c * (x + T::lit(GELU_C) * x * x * x)).tanh())
}

pub fn gelu_grad<T: Scalar>(x: T) -> T {
    let c = T::lit((2.0 / std::f64::consts::PI).sqrt());
    let half = T::lit(0.5);
    let inner = c * (x + T::lit(GELU_C) * x * x * x);
    let th = inner.tanh();
    let d_inner = c * (T::one() + T::lit(3.0 * GELU_C) * x * x);
    half * (T::one() + th) + half * x * (T::one() - th * th) * d_inner
}
