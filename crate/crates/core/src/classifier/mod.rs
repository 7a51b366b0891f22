//! Trainable mask classifiers: a tiny CNN and a micro vision transformer.

mod gradcheck;
mod io;
mod layers;
mod models;
mod ops;
mod optim;
mod scalar;
mod tensor;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::BinaryMask;

pub use gradcheck::{gradcheck, GradcheckReport};
pub use io::{load_weights, save_weights, WeightFile, WEIGHT_MAGIC, WEIGHT_VERSION};
pub use layers::{init_tensor, Init, Mode, Param};
pub use models::{MicroVit, Network, TinyCnn};
pub use ops::{
    conv2d, gelu, mask_values, maxpool, mhsa, padded_side, patchify, patchify_values, softmax, softmax_xent,
};
pub use optim::{adam_step, Adam, AdamConfig};
pub use scalar::{matmul, Scalar};
pub use tensor::Tensor;
pub use train::{evaluate, train, EpochRecord, Evaluation, History, LabeledSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    TinyCnn,
    MicroVit,
}

impl std::str::FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tiny_cnn" | "cnn" => Ok(Arch::TinyCnn),
            "micro_vit" | "vit" => Ok(Arch::MicroVit),
            other => Err(Error::InvalidArgument(format!(
                "unknown architecture `{other}` (expected tiny_cnn or micro_vit)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierConfig {
    pub n_classes: usize,
    pub arch: Arch,
    pub input_side: usize,
    pub batch_size: usize,
    /// Samples per forward/backward pass; gradients accumulate over a batch.
    pub micro_batch: usize,
    pub epochs: usize,
    pub lr0: f64,
    /// Rate from `lr_switch_epoch + 1` on. Unset: 1e-3 for the CNN, `lr0`
    /// (a constant rate) for the transformer.
    pub lr_after_epoch10: Option<f64>,
    pub lr_switch_epoch: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub patch: usize,
    pub proj_dim: usize,
    pub heads: usize,
    pub layers: usize,
    pub dropout: f64,
    pub mlp_head: Vec<usize>,
    pub cnn_channels: Vec<usize>,
    pub cnn_dense: usize,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            n_classes: 4,
            arch: Arch::TinyCnn,
            input_side: 64,
            batch_size: 64,
            micro_batch: 32,
            epochs: 30,
            lr0: 1e-4,
            lr_after_epoch10: None,
            lr_switch_epoch: 10,
            adam_beta1: 0.9,
            adam_beta2: 0.99,
            adam_eps: 1e-8,
            patch: 6,
            proj_dim: 64,
            heads: 4,
            layers: 8,
            dropout: 0.5,
            mlp_head: vec![2048, 1024],
            cnn_channels: vec![8, 16, 32],
            cnn_dense: 128,
            seed: 0,
        }
    }
}

impl ClassifierConfig {
    pub fn new(arch: Arch, n_classes: usize) -> Self {
        Self {
            arch,
            n_classes,
            ..Self::default()
        }
    }

    /// Small instance for gradient checks and quick tests: 16px inputs,
    /// two classes.
    pub fn toy(arch: Arch) -> Self {
        Self {
            arch,
            n_classes: 2,
            input_side: 16,
            batch_size: 4,
            micro_batch: 4,
            patch: 4,
            proj_dim: 8,
            heads: 2,
            layers: 2,
            mlp_head: vec![16, 8],
            cnn_channels: vec![2, 3, 4],
            cnn_dense: 8,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_classes < 2 {
            return fail(format!("need at least 2 classes, got {}", self.n_classes));
        }
        if self.batch_size == 0 || self.micro_batch == 0 || self.epochs == 0 {
            return fail("batch_size, micro_batch and epochs must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout {} outside [0, 1)", self.dropout));
        }
        let lr_ok = |lr: f64| lr > 0.0 && lr.is_finite();
        if !lr_ok(self.lr0) || !self.lr_after_epoch10.map_or(true, lr_ok) {
            return fail("learning rates must be positive".into());
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) || !(self.adam_eps > 0.0) {
            return fail("Adam betas must be in [0, 1) and eps > 0".into());
        }
        match self.arch {
            Arch::TinyCnn => {
                if self.cnn_channels.is_empty() || self.cnn_channels.contains(&0) || self.cnn_dense == 0 {
                    return fail("CNN channel and dense widths must be >= 1".into());
                }
                let div = 1usize << self.cnn_channels.len();
                if self.input_side == 0 || self.input_side % div != 0 {
                    return fail(format!(
                        "input side {} is not divisible by {div} for {} pooling stages",
                        self.input_side,
                        self.cnn_channels.len()
                    ));
                }
            }
            Arch::MicroVit => {
                if self.heads == 0 || self.proj_dim == 0 || self.proj_dim % self.heads != 0 {
                    return fail(format!("{} heads do not divide proj_dim {}", self.heads, self.proj_dim));
                }
                if self.patch == 0 || self.patch > self.input_side {
                    return fail(format!("patch {} does not fit {}px inputs", self.patch, self.input_side));
                }
                if self.mlp_head.contains(&0) {
                    return fail("MLP head widths must be >= 1".into());
                }
            }
        }
        Ok(())
    }

    /// Learning rate for a 1-based epoch.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        if epoch <= self.lr_switch_epoch {
            return self.lr0;
        }
        self.lr_after_epoch10.unwrap_or(match self.arch {
            Arch::TinyCnn => 1e-3,
            Arch::MicroVit => self.lr0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GesturePrediction {
    pub label_index: usize,
    pub probs: Vec<f64>,
    pub frame_index: usize,
    pub t_ms: f64,
}

impl GesturePrediction {
    pub fn confidence(&self) -> f64 {
        self.probs[self.label_index]
    }
}

/// A trained (or freshly initialized) `f32` network with its configuration
/// and class names.
#[derive(Debug, Clone)]
pub struct Classifier {
    pub config: ClassifierConfig,
    pub class_names: Vec<String>,
    network: Network<f32>,
}

impl Classifier {
    pub fn new(config: ClassifierConfig, class_names: Vec<String>) -> Result<Self> {
        if class_names.len() != config.n_classes {
            return Err(Error::Config(format!(
                "{} class names for {} classes",
                class_names.len(),
                config.n_classes
            )));
        }
        let network = Network::new(&config)?;
        Ok(Self {
            config,
            class_names,
            network,
        })
    }

    pub fn network(&mut self) -> &mut Network<f32> {
        &mut self.network
    }

    pub(crate) fn from_parts(config: ClassifierConfig, class_names: Vec<String>, network: Network<f32>) -> Self {
        Self {
            config,
            class_names,
            network,
        }
    }

    pub fn input_side(&self) -> usize {
        self.config.input_side
    }

    /// Logits for a batch of flattened `side * side` inputs in `{0, 1}`.
    pub fn logits(&mut self, inputs: &[f32]) -> Result<Vec<f32>> {
        let img = self.config.input_side * self.config.input_side;
        if inputs.is_empty() || inputs.len() % img != 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} input values are not a whole number of {}x{} images",
                inputs.len(),
                self.config.input_side,
                self.config.input_side
            )));
        }
        let logits = self.network.forward(inputs, Mode::Eval);
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("classifier produced non-finite logits".into()));
        }
        Ok(logits)
    }

    pub fn predict(&mut self, mask: &BinaryMask, frame_index: usize, t_ms: f64) -> Result<GesturePrediction> {
        let side = self.config.input_side;
        if mask.dims() != (side, side) {
            return Err(Error::DimensionMismatch(format!(
                "mask is {}x{}, model expects {side}x{side}",
                mask.width(),
                mask.height()
            )));
        }
        let logits = self.logits(&mask_values(mask))?;
        let logits: Vec<f64> = logits.iter().map(|&v| v as f64).collect();
        let probs = softmax(&logits);
        let label_index = argmax(&probs);
        Ok(GesturePrediction {
            label_index,
            probs,
            frame_index,
            t_ms,
        })
    }

    pub fn label(&self, index: usize) -> &str {
        &self.class_names[index]
    }

    pub fn save(&mut self, path: impl AsRef<std::path::Path>) -> Result<()> {
        save_weights(path, self)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        load_weights(path)
    }
}

/// Index of the first maximum.
pub fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule() {
        let cnn = ClassifierConfig::new(Arch::TinyCnn, 4);
        assert_eq!(cnn.lr_at(1), 1e-4);
        assert_eq!(cnn.lr_at(10), 1e-4);
        assert_eq!(cnn.lr_at(11), 1e-3);
        let vit = ClassifierConfig::new(Arch::MicroVit, 4);
        assert_eq!(vit.lr_at(11), 1e-4);
        let forced = ClassifierConfig {
            lr_after_epoch10: Some(1e-3),
            ..vit
        };
        assert_eq!(forced.lr_at(11), 1e-3);
    }

    #[test]
    fn config_validation() {
        assert!(ClassifierConfig::default().validate().is_ok());
        assert!(ClassifierConfig::new(Arch::MicroVit, 4).validate().is_ok());
        let bad = |f: fn(&mut ClassifierConfig)| {
            let mut c = ClassifierConfig::new(Arch::MicroVit, 4);
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.n_classes = 1));
        assert!(bad(|c| c.heads = 3));
        assert!(bad(|c| c.dropout = 1.0));
        assert!(bad(|c| c.patch = 100));
        let mut c = ClassifierConfig::default();
        c.input_side = 20;
        assert!(c.validate().is_err());
    }

    #[test]
    fn vit_token_count() {
        let mut c = ClassifierConfig::new(Arch::MicroVit, 4);
        c.layers = 1;
        c.mlp_head = vec![4];
        let Network::Vit(v) = Network::<f32>::new(&c).unwrap() else { unreachable!() };
        assert_eq!(v.tokens(), 121);
    }

    #[test]
    fn prediction_is_a_distribution() {
        for arch in [Arch::TinyCnn, Arch::MicroVit] {
            let mut clf = Classifier::new(ClassifierConfig::toy(arch), vec!["a".into(), "b".into()]).unwrap();
            let mask = BinaryMask::from_fn(16, 16, |r, c| (r + c) % 3 == 0);
            let p = clf.predict(&mask, 7, 1.5).unwrap();
            assert!((p.probs.iter().sum::<f64>() - 1.0).abs() < 1e-5);
            assert_eq!(p.label_index, argmax(&p.probs));
            assert_eq!(p.frame_index, 7);
            // Deterministic across fresh instances.
            let mut again = Classifier::new(ClassifierConfig::toy(arch), vec!["a".into(), "b".into()]).unwrap();
            assert_eq!(again.predict(&mask, 7, 1.5).unwrap(), p);
            assert!(clf.predict(&BinaryMask::empty(8, 8), 0, 0.0).is_err());
        }
    }

    #[test]
    fn scaling_logits_keeps_argmax() {
        let logits = [0.3f64, 2.0, -1.0];
        let doubled: Vec<f64> = logits.iter().map(|v| v * 2.0).collect();
        assert_eq!(argmax(&softmax(&logits)), argmax(&softmax(&doubled)));
    }
}
