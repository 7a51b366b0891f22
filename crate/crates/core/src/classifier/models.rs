use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{init_tensor, Conv2d, Dropout, Gelu, Init, LayerNorm, Linear, MaxPool, Mhsa, Mode, Param, Relu};
use super::ops::{padded_side, patchify_values, ConvGeometry};
use super::scalar::Scalar;
use super::{Arch, ClassifierConfig};
use crate::error::{Error, Result};

const VIT_SIGMA: f64 = 0.02;

/// Three conv-ReLU-pool stages, a ReLU dense layer and the class layer.
#[derive(Debug, Clone)]
pub struct TinyCnn<T: Scalar> {
    stages: Vec<(Conv2d<T>, Relu, MaxPool)>,
    dense: Linear<T>,
    relu: Relu,
    classes: Linear<T>,
}

impl<T: Scalar> TinyCnn<T> {
    pub fn new(config: &ClassifierConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut shape = (1, config.input_side, config.input_side);
        let mut stages = Vec::new();
        for (i, &k) in config.cnn_channels.iter().enumerate() {
            let g = ConvGeometry {
                channels: shape.0,
                height: shape.1,
                width: shape.2,
                kh: 3,
                kw: 3,
                stride: 1,
                pad: 1,
            };
            let conv = Conv2d::new(&format!("conv{i}"), g, k, &mut rng);
            let pool = MaxPool::new(2, conv.out_shape());
            shape = pool.out_shape();
            stages.push((conv, Relu::default(), pool));
        }
        let flat = shape.0 * shape.1 * shape.2;
        Self {
            stages,
            dense: Linear::new("dense", flat, config.cnn_dense, Init::HeUniform, &mut rng),
            relu: Relu::default(),
            classes: Linear::new("classes", config.cnn_dense, config.n_classes, Init::HeUniform, &mut rng),
        }
    }

    fn forward(&mut self, inputs: &[T], _mode: Mode) -> Vec<T> {
        let mut x = inputs.to_vec();
        for (conv, relu, pool) in &mut self.stages {
            x = pool.forward(&relu.forward(conv.forward(&x)));
        }
        let x = self.relu.forward(self.dense.forward(&x));
        self.classes.forward(&x)
    }

    fn backward(&mut self, dlogits: &[T]) {
        let g = self.classes.backward(dlogits);
        let mut g = self.dense.backward(&self.relu.backward(g));
        for (conv, relu, pool) in self.stages.iter_mut().rev() {
            g = conv.backward(&relu.backward(pool.backward(&g)));
        }
    }

    fn kink_signature(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for (_, relu, pool) in &self.stages {
            relu.pattern().hash(&mut h);
            pool.pattern().hash(&mut h);
        }
        self.relu.pattern().hash(&mut h);
        h.finish()
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut out = Vec::new();
        for (conv, _, _) in &mut self.stages {
            out.extend(conv.params_mut());
        }
        out.extend(self.dense.params_mut());
        out.extend(self.classes.params_mut());
        out
    }
}

#[derive(Debug, Clone)]
struct Block<T: Scalar> {
    ln1: LayerNorm<T>,
    attn: Mhsa<T>,
    ln2: LayerNorm<T>,
    fc1: Linear<T>,
    act: Gelu<T>,
    fc2: Linear<T>,
}

impl<T: Scalar> Block<T> {
    fn forward(&mut self, x: Vec<T>) -> Vec<T> {
        let a = self.attn.forward(&self.ln1.forward(&x));
        let x: Vec<T> = x.iter().zip(&a).map(|(&u, &v)| u + v).collect();
        let m = self.fc2.forward(&self.act.forward(self.fc1.forward(&self.ln2.forward(&x))));
        x.iter().zip(&m).map(|(&u, &v)| u + v).collect()
    }

    fn backward(&mut self, dy: Vec<T>) -> Vec<T> {
        let dm = self.ln2.backward(&self.fc1.backward(&self.act.backward(self.fc2.backward(&dy))));
        let dx: Vec<T> = dy.iter().zip(&dm).map(|(&u, &v)| u + v).collect();
        let da = self.ln1.backward(&self.attn.backward(&dx));
        dx.iter().zip(&da).map(|(&u, &v)| u + v).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut out: Vec<&mut Param<T>> = Vec::new();
        out.extend(self.ln1.params_mut());
        out.extend(self.attn.params_mut());
        out.extend(self.ln2.params_mut());
        out.extend(self.fc1.params_mut());
        out.extend(self.fc2.params_mut());
        out
    }
}

/// Patch embedding, learned positions, pre-norm encoder blocks, then a
/// flattened GeLU MLP head.
#[derive(Debug, Clone)]
pub struct MicroVit<T: Scalar> {
    side: usize,
    patch: usize,
    tokens: usize,
    dim: usize,
    embed: Linear<T>,
    pos: Param<T>,
    blocks: Vec<Block<T>>,
    ln: LayerNorm<T>,
    head_dropout: Dropout<T>,
    head: Vec<(Linear<T>, Gelu<T>, Dropout<T>)>,
    classes: Linear<T>,
}

impl<T: Scalar> MicroVit<T> {
    pub fn new(config: &ClassifierConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let grid = padded_side(config.input_side, config.patch) / config.patch;
        let tokens = grid * grid;
        let d = config.proj_dim;
        let plen = config.patch * config.patch;
        let embed = Linear::new("embed", plen, d, Init::TruncNormal(VIT_SIGMA), &mut rng);
        let pos = Param::new("pos", init_tensor(vec![tokens, d], d, Init::TruncNormal(VIT_SIGMA), &mut rng));
        let blocks = (0..config.layers)
            .map(|i| {
                let name = format!("block{i}");
                Block {
                    ln1: LayerNorm::new(&format!("{name}.ln1"), d),
                    attn: Mhsa::new(&format!("{name}.attn"), d, config.heads, tokens, VIT_SIGMA, &mut rng),
                    ln2: LayerNorm::new(&format!("{name}.ln2"), d),
                    fc1: Linear::new(&format!("{name}.fc1"), d, 2 * d, Init::TruncNormal(VIT_SIGMA), &mut rng),
                    act: Gelu::default(),
                    fc2: Linear::new(&format!("{name}.fc2"), 2 * d, d, Init::TruncNormal(VIT_SIGMA), &mut rng),
                }
            })
            .collect();
        let mut width = tokens * d;
        let mut head = Vec::new();
        for (i, &units) in config.mlp_head.iter().enumerate() {
            head.push((
                Linear::new(&format!("head{i}"), width, units, Init::HeUniform, &mut rng),
                Gelu::default(),
                Dropout::new(config.dropout, i as u64 + 1),
            ));
            width = units;
        }
        Self {
            side: config.input_side,
            patch: config.patch,
            tokens,
            dim: d,
            embed,
            pos,
            blocks,
            ln: LayerNorm::new("ln", d),
            head_dropout: Dropout::new(config.dropout, 0),
            head,
            classes: Linear::new("classes", width, config.n_classes, Init::HeUniform, &mut rng),
        }
    }

    pub fn tokens(&self) -> usize {
        self.tokens
    }

    fn patches(&self, inputs: &[T]) -> Vec<T> {
        let img = self.side * self.side;
        inputs
            .chunks(img)
            .flat_map(|x| {
                patchify_values(x, self.side, self.patch)
                    .expect("input side matches the model")
                    .into_data()
            })
            .collect()
    }

    /// Forward from already patchified input, `[batch, tokens, patch^2]`.
    pub fn forward_patches(&mut self, patches: &[T], mode: Mode) -> Vec<T> {
        let mut x = self.embed.forward(patches);
        let pos = self.pos.value.data();
        for row in x.chunks_mut(self.tokens * self.dim) {
            for (v, &p) in row.iter_mut().zip(pos) {
                *v += p;
            }
        }
        for block in &mut self.blocks {
            x = block.forward(x);
        }
        let mut x = self.head_dropout.forward(self.ln.forward(&x), mode);
        for (lin, act, drop) in &mut self.head {
            x = drop.forward(act.forward(lin.forward(&x)), mode);
        }
        self.classes.forward(&x)
    }

    fn forward(&mut self, inputs: &[T], mode: Mode) -> Vec<T> {
        let p = self.patches(inputs);
        self.forward_patches(&p, mode)
    }

    fn backward(&mut self, dlogits: &[T]) {
        let mut g = self.classes.backward(dlogits);
        for (lin, act, drop) in self.head.iter_mut().rev() {
            g = lin.backward(&act.backward(drop.backward(g)));
        }
        let mut g = self.ln.backward(&self.head_dropout.backward(g));
        for block in self.blocks.iter_mut().rev() {
            g = block.backward(g);
        }
        let dpos = self.pos.grad.data_mut();
        for row in g.chunks(self.tokens * self.dim) {
            for (d, &v) in dpos.iter_mut().zip(row) {
                *d += v;
            }
        }
        self.embed.backward(&g);
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut out: Vec<&mut Param<T>> = Vec::new();
        out.extend(self.embed.params_mut());
        out.push(&mut self.pos);
        for b in &mut self.blocks {
            out.extend(b.params_mut());
        }
        out.extend(self.ln.params_mut());
        for (lin, _, _) in &mut self.head {
            out.extend(lin.params_mut());
        }
        out.extend(self.classes.params_mut());
        out
    }
}

/// Either architecture behind one interface.
#[derive(Debug, Clone)]
pub enum Network<T: Scalar> {
    Cnn(TinyCnn<T>),
    Vit(MicroVit<T>),
}

impl<T: Scalar> Network<T> {
    pub fn new(config: &ClassifierConfig) -> Result<Self> {
        config.validate()?;
        Ok(match config.arch {
            Arch::TinyCnn => Network::Cnn(TinyCnn::new(config)),
            Arch::MicroVit => Network::Vit(MicroVit::new(config)),
        })
    }

    /// Logits (`[batch, n_classes]`) for `batch` images of `side * side`
    /// values each.
    pub fn forward(&mut self, inputs: &[T], mode: Mode) -> Vec<T> {
        match self {
            Network::Cnn(m) => m.forward(inputs, mode),
            Network::Vit(m) => m.forward(inputs, mode),
        }
    }

    /// Accumulate parameter gradients for the last forward pass.
    pub fn backward(&mut self, dlogits: &[T]) {
        match self {
            Network::Cnn(m) => m.backward(dlogits),
            Network::Vit(m) => m.backward(dlogits),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        match self {
            Network::Cnn(m) => m.params_mut(),
            Network::Vit(m) => m.params_mut(),
        }
    }

    /// Hash of the piecewise-linear branch taken in the last forward pass
    /// (ReLU signs, pooling winners). Equal signatures mean the loss is
    /// smooth between two parameter points on that path.
    pub fn kink_signature(&self) -> u64 {
        match self {
            Network::Cnn(m) => m.kink_signature(),
            Network::Vit(_) => 0,
        }
    }

    pub fn param_count(&mut self) -> usize {
        self.params_mut().iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Copy parameter values from `other`, matched by name and shape.
    pub fn load_params<'a>(&mut self, mut lookup: impl FnMut(&str) -> Option<&'a [f32]>) -> Result<()> {
        for p in self.params_mut() {
            let data = lookup(&p.name)
                .ok_or_else(|| Error::Parse {
                    context: "weights".into(),
                    message: format!("missing tensor `{}`", p.name),
                })?;
            if data.len() != p.value.len() {
                return Err(Error::DimensionMismatch(format!(
                    "tensor `{}` has {} values, model expects {}",
                    p.name,
                    data.len(),
                    p.value.len()
                )));
            }
            for (dst, &src) in p.value.data_mut().iter_mut().zip(data) {
                *dst = T::from_f32(src).unwrap_or_else(T::nan);
            }
        }
        Ok(())
    }
}
