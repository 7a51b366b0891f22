use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::Mode;
use super::models::Network;
use super::ops::softmax_xent;
use super::ClassifierConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub param_count: usize,
    pub checked: usize,
    /// Elements whose finite difference crossed a ReLU or pooling kink.
    pub skipped: usize,
    pub failures: usize,
    pub max_rel_err: f64,
    /// Parameter name and element index of the largest error.
    pub worst: (String, usize),
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Every parameter is redrawn from `U(-PARAM_RANGE, PARAM_RANGE)` before
/// checking, away from the small-scale initialization where layer norms see
/// near-zero variance.
const PARAM_RANGE: f64 = 0.5;

/// Relative error with a floor on the scale, so that gradients that are
/// both essentially zero compare as equal.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn batch_loss(net: &mut Network<f64>, inputs: &[f64], labels: &[usize], mode: Mode, n: usize) -> Result<(f64, Vec<f64>)> {
    let logits = net.forward(inputs, mode);
    let scale = 1.0 / labels.len() as f64;
    let mut loss = 0.0;
    let mut dlogits = Vec::with_capacity(logits.len());
    for (row, &label) in logits.chunks(n).zip(labels) {
        let (l, g) = softmax_xent(row, label)?;
        loss += l * scale;
        dlogits.extend(g.into_iter().map(|v| v * scale));
    }
    Ok((loss, dlogits))
}

/// Compare backpropagated gradients of an `f64` instance of `config`, with
/// all parameters redrawn at random, against central differences on random
/// non-binary inputs. Dropout stays active with a fixed mask. Elements whose
/// `±step` probes switch a ReLU sign or a pooling winner are skipped, since
/// the difference quotient is then not a derivative estimate. Checks every parameter when there are at most
/// `max_checked`, otherwise a seeded sample of that many.
pub fn gradcheck(
    config: &ClassifierConfig,
    samples: usize,
    max_checked: usize,
    step: f64,
    tolerance: f64,
) -> Result<GradcheckReport> {
    let mut net = Network::<f64>::new(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x6772_6164);
    let img = config.input_side * config.input_side;
    let inputs: Vec<f64> = (0..samples * img).map(|_| rng.gen_range(0.0..1.0)).collect();
    let labels: Vec<usize> = (0..samples).map(|i| i % config.n_classes).collect();
    let mode = Mode::Train { seed: config.seed };
    let n = config.n_classes;
    for p in net.params_mut() {
        for v in p.value.data_mut() {
            *v = rng.gen_range(-PARAM_RANGE..PARAM_RANGE);
        }
    }

    net.zero_grad();
    let (_, dlogits) = batch_loss(&mut net, &inputs, &labels, mode, n)?;
    net.backward(&dlogits);
    let signature = net.kink_signature();

    // Flat (param, element) addresses.
    let sizes: Vec<usize> = net.params_mut().iter().map(|p| p.value.len()).collect();
    let total: usize = sizes.iter().sum();
    let chosen: Vec<usize> = if total <= max_checked {
        (0..total).collect()
    } else {
        let mut s = sample(&mut rng, total, max_checked).into_vec();
        s.sort_unstable();
        s
    };
    let locate = |mut flat: usize| {
        for (p, &len) in sizes.iter().enumerate() {
            if flat < len {
                return (p, flat);
            }
            flat -= len;
        }
        unreachable!("index within total")
    };
    let analytic: Vec<f64> = {
        let params = net.params_mut();
        chosen
            .iter()
            .map(|&f| {
                let (p, i) = locate(f);
                params[p].grad.data()[i]
            })
            .collect()
    };

    let mut report = GradcheckReport {
        param_count: total,
        checked: 0,
        skipped: 0,
        failures: 0,
        max_rel_err: 0.0,
        worst: (String::new(), 0),
    };
    for (&flat, &a) in chosen.iter().zip(&analytic) {
        let (p, i) = locate(flat);
        let original = net.params_mut()[p].value.data()[i];
        net.params_mut()[p].value.data_mut()[i] = original + step;
        let (plus, _) = batch_loss(&mut net, &inputs, &labels, mode, n)?;
        let smooth_plus = net.kink_signature() == signature;
        net.params_mut()[p].value.data_mut()[i] = original - step;
        let (minus, _) = batch_loss(&mut net, &inputs, &labels, mode, n)?;
        let smooth_minus = net.kink_signature() == signature;
        net.params_mut()[p].value.data_mut()[i] = original;
        if !(smooth_plus && smooth_minus) {
            report.skipped += 1;
            continue;
        }
        report.checked += 1;
        let numeric = (plus - minus) / (2.0 * step);
        if !numeric.is_finite() {
            return Err(Error::Numeric("finite-difference loss is not finite".into()));
        }
        let err = rel_err(a, numeric);
        if err >= tolerance {
            report.failures += 1;
        }
        if err > report.max_rel_err {
            report.max_rel_err = err;
            report.worst = (net.params_mut()[p].name.clone(), i);
        }
    }
    Ok(report)
}
