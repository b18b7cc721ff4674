//! Adam/MAE training with inverted dropout and chronological early stopping.

use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::features::FeatureMatrix;
use crate::mlp::{axpy, EpochRecord, ForwardCache, Layer, TrainedModel};
use crate::scaler::ScalerParams;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingHyperparams {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    /// Trailing (most recent) share of instances held out for early stopping.
    pub validation_fraction: f64,
    pub adam_betas: (f64, f64),
    pub adam_epsilon: f64,
    pub seed: u64,
}

impl Default for TrainingHyperparams {
    fn default() -> Self {
        TrainingHyperparams {
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 300,
            early_stop_patience: 20,
            validation_fraction: 0.15,
            adam_betas: (0.9, 0.999),
            adam_epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainingHyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be > 0");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation_fraction must be in (0, 1)");
        }
        let (b1, b2) = self.adam_betas;
        if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2)) {
            return bad("adam betas must be in [0, 1)");
        }
        if self.adam_epsilon.is_nan() || self.adam_epsilon <= 0.0 {
            return bad("adam_epsilon must be > 0");
        }
        Ok(())
    }

    /// Number of trailing instances used for validation out of `n`.
    pub fn validation_len(&self, n: usize) -> usize {
        (libm::round(n as f64 * self.validation_fraction) as usize).clamp(1, n.saturating_sub(1).max(1))
    }
}

/// Adam moment estimates for one flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(len: usize, lr: f64, betas: (f64, f64), eps: f64) -> Self {
        Adam { m: vec![0.0; len], v: vec![0.0; len], t: 0, lr, beta1: betas.0, beta2: betas.1, eps }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - libm::pow(self.beta1, f64::from(self.t));
        let c2 = 1.0 - libm::pow(self.beta2, f64::from(self.t));
        for ((p, &g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.lr * m_hat / (libm::sqrt(v_hat) + self.eps);
        }
    }
}

/// Mean absolute error between equally long slices.
pub fn mae(pred: &[f64], target: &[f64]) -> f64 {
    pred.iter().zip(target).map(|(a, b)| (a - b).abs()).sum::<f64>() / pred.len().max(1) as f64
}

/// MAE plus `l1 · Σ|W|` over all weight matrices (biases excluded).
pub fn regularised_loss(pred: &[f64], target: &[f64], layers: &[Layer], l1: f64) -> f64 {
    let base = mae(pred, target);
    if l1 == 0.0 {
        return base;
    }
    base + l1 * layers.iter().flat_map(|l| &l.weights).map(|w| w.abs()).sum::<f64>()
}

struct Gradients {
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros(layers: &[Layer]) -> Self {
        Gradients {
            weights: layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    fn clear(&mut self) {
        self.weights.iter_mut().chain(self.biases.iter_mut()).for_each(|g| g.fill(0.0));
    }
}

/// Fits scalers on the training slice, then minimises normalised MAE (+ L1) with Adam.
/// Returns the parameters of the epoch with the lowest validation MAE.
pub fn train(mut model: TrainedModel, features: &FeatureMatrix, hp: &TrainingHyperparams) -> Result<TrainedModel> {
    hp.validate()?;
    model.validate()?;
    let n = features.n_instances();
    let n_in = model.spec.n_inputs();
    let n_out = model.spec.n_outputs();
    if features.n_features() != n_in {
        return Err(Error::DimensionMismatch { expected: n_in, got: features.n_features() });
    }
    if features.targets.len() != n * n_out {
        return Err(Error::DimensionMismatch { expected: n * n_out, got: features.targets.len() });
    }
    if n < 2 * hp.batch_size {
        return Err(Error::TooFewInstances { needed: 2 * hp.batch_size, got: n });
    }
    let n_val = hp.validation_len(n);
    let n_train = n - n_val;

    model.input_scaler = ScalerParams::fit(model.spec.input_scaler, &features.values[..n_train * n_in], n_in)?;
    model.output_scaler = ScalerParams::fit(model.spec.output_scaler, &features.targets[..n_train * n_out], n_out)?;
    let x = model.input_scaler.transform(&features.values)?;
    let y = model.output_scaler.transform(&features.targets)?;

    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut adam_w: Vec<Adam> =
        model.layers.iter().map(|l| Adam::new(l.weights.len(), hp.learning_rate, hp.adam_betas, hp.adam_epsilon)).collect();
    let mut adam_b: Vec<Adam> =
        model.layers.iter().map(|l| Adam::new(l.bias.len(), hp.learning_rate, hp.adam_betas, hp.adam_epsilon)).collect();
    let mut grads = Gradients::zeros(&model.layers);
    let mut cache = ForwardCache::new(&model.spec);
    let mut masks: Vec<Vec<f64>> = model.spec.layer_sizes[1..model.spec.layer_sizes.len() - 1].iter().map(|&h| vec![1.0; h]).collect();
    let mut deltas: Vec<Vec<f64>> = model.spec.layer_sizes[1..].iter().map(|&h| vec![0.0; h]).collect();

    let mut order: Vec<usize> = (0..n_train).collect();
    let mut best_val = f64::INFINITY;
    let mut best_layers = model.layers.clone();
    let mut since_best = 0usize;
    let mut history = Vec::new();
    let keep = 1.0 - model.spec.dropout_rate;

    for epoch in 0..hp.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(hp.batch_size) {
            grads.clear();
            let mut abs_err = 0.0;
            let scale = 1.0 / (batch.len() * n_out) as f64;
            for &i in batch {
                // dropout masks for this sample
                for mask in masks.iter_mut() {
                    for m in mask.iter_mut() {
                        *m = if model.spec.dropout_rate > 0.0 && rng.random::<f64>() >= keep { 0.0 } else { 1.0 / keep };
                    }
                }
                forward_train(&model, &x[i * n_in..(i + 1) * n_in], &masks, &mut cache);
                let target = &y[i * n_out..(i + 1) * n_out];
                let out_delta = deltas.last_mut().expect("output layer");
                for ((d, &p), &t) in out_delta.iter_mut().zip(cache.output()).zip(target) {
                    let e = p - t;
                    abs_err += e.abs();
                    *d = scale * sign(e);
                }
                backward(&model, &cache, &masks, &mut deltas, &mut grads);
            }
            let mut loss = abs_err * scale;
            if model.spec.l1_factor > 0.0 {
                let l1 = model.spec.l1_factor;
                for (l, layer) in model.layers.iter().enumerate() {
                    for (g, &w) in grads.weights[l].iter_mut().zip(&layer.weights) {
                        *g += l1 * sign(w);
                        loss += l1 * w.abs();
                    }
                }
            }
            if !loss.is_finite() {
                return Err(Error::DivergedLoss(epoch));
            }
            epoch_loss += loss;
            batches += 1;
            for (l, layer) in model.layers.iter_mut().enumerate() {
                adam_w[l].step(&mut layer.weights, &grads.weights[l]);
                adam_b[l].step(&mut layer.bias, &grads.biases[l]);
            }
        }

        let val_mae = validation_mae(&model, &x[n_train * n_in..], &y[n_train * n_out..], &mut cache);
        if !val_mae.is_finite() {
            return Err(Error::DivergedLoss(epoch));
        }
        history.push(EpochRecord { epoch, train_loss: epoch_loss / batches as f64, val_mae });
        if val_mae < best_val {
            best_val = val_mae;
            best_layers.clone_from(&model.layers);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= hp.early_stop_patience {
                break;
            }
        }
    }
    model.layers = best_layers;
    model.history = history;
    Ok(model)
}

#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn forward_train(model: &TrainedModel, x_norm: &[f64], masks: &[Vec<f64>], cache: &mut ForwardCache) {
    cache.act[0].copy_from_slice(x_norm);
    let last = model.layers.len() - 1;
    for (l, layer) in model.layers.iter().enumerate() {
        let (head, tail) = cache.act.split_at_mut(l + 1);
        layer.affine(&head[l], &mut cache.pre[l]);
        let out = &mut tail[0];
        if l == last {
            out.copy_from_slice(&cache.pre[l]);
        } else {
            for ((o, &z), &m) in out.iter_mut().zip(&cache.pre[l]).zip(&masks[l]) {
                *o = if m == 0.0 { 0.0 } else { model.spec.activation.apply(z) * m };
            }
        }
    }
}

/// Accumulates parameter gradients given the output delta already stored in `deltas.last()`.
fn backward(model: &TrainedModel, cache: &ForwardCache, masks: &[Vec<f64>], deltas: &mut [Vec<f64>], grads: &mut Gradients) {
    for l in (0..model.layers.len()).rev() {
        let layer = &model.layers[l];
        let input = &cache.act[l];
        {
            let delta = &deltas[l];
            let gw = &mut grads.weights[l];
            for (r, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    axpy(d, input, &mut gw[r * layer.cols..(r + 1) * layer.cols]);
                    grads.biases[l][r] += d;
                }
            }
        }
        if l == 0 {
            break;
        }
        let (lower, upper) = deltas.split_at_mut(l);
        let prev = &mut lower[l - 1];
        prev.fill(0.0);
        for (r, &d) in upper[0].iter().enumerate() {
            if d != 0.0 {
                axpy(d, layer.row(r), prev);
            }
        }
        for ((p, &z), &m) in prev.iter_mut().zip(&cache.pre[l - 1]).zip(&masks[l - 1]) {
            *p *= if m == 0.0 { 0.0 } else { model.spec.activation.derivative(z) * m };
        }
    }
}

fn validation_mae(model: &TrainedModel, x: &[f64], y: &[f64], cache: &mut ForwardCache) -> f64 {
    let n_in = model.spec.n_inputs();
    let n_out = model.spec.n_outputs();
    let rows = x.len() / n_in;
    let mut total = 0.0;
    for i in 0..rows {
        model.forward_cached(&x[i * n_in..(i + 1) * n_in], cache);
        total += cache.output().iter().zip(&y[i * n_out..(i + 1) * n_out]).map(|(a, b)| (a - b).abs()).sum::<f64>();
    }
    total / (rows * n_out) as f64
}
