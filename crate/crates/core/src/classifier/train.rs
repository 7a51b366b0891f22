use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::Mode;
use super::models::Network;
use super::ops::{mask_values, softmax_xent};
use super::optim::{Adam, AdamConfig};
use super::{argmax, Classifier, ClassifierConfig};
use crate::error::{Error, Result};
use crate::imaging::BinaryMask;

/// Flattened `{0, 1}` inputs with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub side: usize,
    pub inputs: Vec<f32>,
    pub labels: Vec<usize>,
}

impl LabeledSet {
    pub fn from_masks(masks: &[BinaryMask], labels: &[usize]) -> Result<Self> {
        if masks.len() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} masks but {} labels",
                masks.len(),
                labels.len()
            )));
        }
        let side = masks.first().map_or(0, |m| m.width());
        let mut inputs = Vec::with_capacity(masks.len() * side * side);
        for (i, m) in masks.iter().enumerate() {
            if m.dims() != (side, side) {
                return Err(Error::DimensionMismatch(format!(
                    "mask {i} is {}x{}, expected {side}x{side}",
                    m.width(),
                    m.height()
                )));
            }
            inputs.extend(mask_values::<f32>(m));
        }
        Ok(Self {
            side,
            inputs,
            labels: labels.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input(&self, i: usize) -> &[f32] {
        let n = self.side * self.side;
        &self.inputs[i * n..(i + 1) * n]
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            side: self.side,
            inputs: indices.iter().flat_map(|&i| self.input(i).iter().copied()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose weights were kept (highest validation accuracy, earliest
    /// on ties).
    pub best_epoch: usize,
}

impl History {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,train_acc,val_loss,val_acc,lr\n");
        for r in &self.epochs {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc, r.lr
            );
        }
        out
    }

    pub fn best(&self) -> Option<&EpochRecord> {
        self.epochs.iter().find(|r| r.epoch == self.best_epoch)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
    pub predictions: Vec<usize>,
}

fn check_set(set: &LabeledSet, config: &ClassifierConfig, what: &str) -> Result<()> {
    if set.is_empty() {
        return Err(Error::InvalidArgument(format!("{what} split is empty")));
    }
    if set.side != config.input_side {
        return Err(Error::DimensionMismatch(format!(
            "{what} inputs are {}px, model expects {}px",
            set.side, config.input_side
        )));
    }
    if let Some(&bad) = set.labels.iter().find(|&&l| l >= config.n_classes) {
        return Err(Error::InvalidArgument(format!(
            "{what} label {bad} outside {} classes",
            config.n_classes
        )));
    }
    Ok(())
}

fn eval_network(net: &mut Network<f32>, set: &LabeledSet, chunk: usize, n_classes: usize) -> Result<Evaluation> {
    let img = set.side * set.side;
    let mut loss = 0.0;
    let mut predictions = Vec::with_capacity(set.len());
    for (start, inputs) in (0..set.len()).step_by(chunk).zip(set.inputs.chunks(chunk * img)) {
        let logits = net.forward(inputs, Mode::Eval);
        for (j, row) in logits.chunks(n_classes).enumerate() {
            let (l, _) = softmax_xent(row, set.labels[start + j])?;
            loss += l as f64;
            predictions.push(argmax(row));
        }
    }
    if !loss.is_finite() {
        return Err(Error::Numeric("evaluation loss is not finite".into()));
    }
    let correct = predictions.iter().zip(&set.labels).filter(|(p, l)| p == l).count();
    Ok(Evaluation {
        loss: loss / set.len() as f64,
        accuracy: correct as f64 / set.len() as f64,
        predictions,
    })
}

/// Loss and accuracy of a classifier on a labeled set, dropout off.
pub fn evaluate(classifier: &mut Classifier, set: &LabeledSet) -> Result<Evaluation> {
    check_set(set, &classifier.config, "evaluation")?;
    let (chunk, n) = (classifier.config.micro_batch, classifier.config.n_classes);
    eval_network(classifier.network(), set, chunk, n)
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut x = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    x ^= x >> 31;
    x.wrapping_mul(0xBF58_476D_1CE4_E5B9)
}

/// Train with seeded shuffling and dropout, keeping the weights of the best
/// validation epoch. `on_epoch` sees each record as it is produced.
pub fn train(
    train_set: &LabeledSet,
    val_set: &LabeledSet,
    config: &ClassifierConfig,
    class_names: Vec<String>,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(Classifier, History)> {
    config.validate()?;
    check_set(train_set, config, "training")?;
    check_set(val_set, config, "validation")?;
    let mut classifier = Classifier::new(config.clone(), class_names)?;
    let net = classifier.network();
    let mut adam = Adam::new(AdamConfig {
        beta1: config.adam_beta1,
        beta2: config.adam_beta2,
        eps: config.adam_eps,
    });
    let img = config.input_side * config.input_side;
    let n = config.n_classes;
    let mut history = History::default();
    let mut best: Option<(f64, Vec<Vec<f32>>)> = None;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut batch_inputs = Vec::with_capacity(config.micro_batch * img);

    for epoch in 1..=config.epochs {
        let lr = config.lr_at(epoch);
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(config.seed, epoch as u64, 0)));
        let (mut loss_sum, mut correct) = (0.0f64, 0usize);
        for batch in order.chunks(config.batch_size) {
            net.zero_grad();
            let scale = 1.0 / batch.len() as f32;
            for (mb_index, micro) in batch.chunks(config.micro_batch).enumerate() {
                batch_inputs.clear();
                for &i in micro {
                    batch_inputs.extend_from_slice(train_set.input(i));
                }
                let seed = mix(config.seed, adam.steps() + 1, mb_index as u64 + 1);
                let logits = net.forward(&batch_inputs, Mode::Train { seed });
                let mut dlogits = Vec::with_capacity(logits.len());
                for (row, &i) in logits.chunks(n).zip(micro) {
                    let label = train_set.labels[i];
                    let (loss, grad) = softmax_xent(row, label)?;
                    if !loss.is_finite() {
                        return Err(Error::Numeric(format!("non-finite training loss at epoch {epoch}")));
                    }
                    loss_sum += loss as f64;
                    correct += usize::from(argmax(row) == label);
                    dlogits.extend(grad.into_iter().map(|g| g * scale));
                }
                net.backward(&dlogits);
            }
            adam.step(net.params_mut(), lr);
        }
        let val = eval_network(net, val_set, config.micro_batch, n)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            train_acc: correct as f64 / train_set.len() as f64,
            val_loss: val.loss,
            val_acc: val.accuracy,
            lr,
        };
        if !record.train_loss.is_finite() {
            return Err(Error::Numeric(format!("non-finite training loss at epoch {epoch}")));
        }
        if best.as_ref().map_or(true, |(acc, _)| val.accuracy > *acc) {
            let snapshot = net.params_mut().iter().map(|p| p.value.data().to_vec()).collect();
            best = Some((val.accuracy, snapshot));
            history.best_epoch = epoch;
        }
        on_epoch(&record);
        history.epochs.push(record);
    }
    if let Some((_, snapshot)) = best {
        for (p, data) in net.params_mut().into_iter().zip(snapshot) {
            p.value.data_mut().copy_from_slice(&data);
        }
    }
    Ok((classifier, history))
}
