//! Multilayer-perceptron forecaster: specification, initialisation, inference and Jacobians.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::market::MarketId;
use crate::math;
use crate::scaler::{ScalerKind, ScalerParams};
use crate::{Error, Result, HOURS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Activation {
    Softplus,
    Selu,
    /// Identity; gives an affine network, used as a linear surrogate.
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Softplus => math::softplus(x),
            Activation::Selu => math::selu(x),
            Activation::Linear => x,
        }
    }

    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Softplus => math::sigmoid(x),
            Activation::Selu => math::selu_derivative(x),
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Init {
    GlorotUniform,
    HeNormal,
    LecunUniform,
    LecunNormal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// `[n_in, hidden.., n_out]`.
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub dropout_rate: f64,
    pub l1_factor: f64,
    pub init: Init,
    pub input_scaler: ScalerKind,
    pub output_scaler: ScalerKind,
    pub seed: u64,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::InvalidSpec("need at least input and output sizes".to_string()));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::InvalidSpec("layer sizes must be >= 1".to_string()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidSpec(format!("dropout rate {} outside [0, 1)", self.dropout_rate)));
        }
        if !(self.l1_factor >= 0.0 && self.l1_factor.is_finite()) {
            return Err(Error::InvalidSpec(format!("l1 factor {} must be >= 0", self.l1_factor)));
        }
        Ok(())
    }

    pub fn n_inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn n_outputs(&self) -> usize {
        *self.layer_sizes.last().unwrap_or(&0)
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Tuned two-hidden-layer architecture for each benchmark market.
    pub fn builtin(market: MarketId, seed: u64) -> ModelSpec {
        use Activation::*;
        use Init::*;
        use ScalerKind::*;
        let (h1, h2, activation, dropout_rate, l1_factor, init, input_scaler, output_scaler) = match market {
            MarketId::De => (329, 379, Softplus, 0.455, 0.0, GlorotUniform, Std, Median),
            MarketId::Fr => (233, 206, Softplus, 0.193, 0.0, GlorotUniform, Arcsinh, Std),
            MarketId::Be => (205, 308, Softplus, 0.253, 0.0, HeNormal, Arcsinh, Arcsinh),
            MarketId::Np => (274, 308, Softplus, 0.154, 0.0, LecunUniform, Median, Std),
            MarketId::Pjm => (299, 376, Selu, 0.0079, 0.000306, LecunUniform, Arcsinh, Arcsinh),
        };
        let n_in = crate::market::MarketConfig::builtin(market).feature_count();
        ModelSpec {
            layer_sizes: vec![n_in, h1, h2, HOURS],
            activation,
            dropout_rate,
            l1_factor,
            init,
            input_scaler,
            output_scaler,
            seed,
        }
    }
}

/// Dense layer, `weights` row-major with `rows` = fan-out and `cols` = fan-in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Layer { rows, cols, weights: vec![0.0; rows * cols], bias: vec![0.0; rows] }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.weights[r * self.cols..(r + 1) * self.cols]
    }

    /// out = W·x + b
    #[inline]
    pub fn affine(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate().take(self.rows) {
            *o = self.bias[r] + dot(self.row(r), x);
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators; fixed order keeps results reproducible
    let n = a.len().min(b.len());
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    let chunks = n / 4;
    for c in 0..chunks {
        let k = 4 * c;
        s0 += a[k] * b[k];
        s1 += a[k + 1] * b[k + 1];
        s2 += a[k + 2] * b[k + 2];
        s3 += a[k + 3] * b[k + 3];
    }
    let mut s = (s0 + s1) + (s2 + s3);
    for k in 4 * chunks..n {
        s += a[k] * b[k];
    }
    s
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub layers: Vec<Layer>,
    pub input_scaler: ScalerParams,
    pub output_scaler: ScalerParams,
    pub history: Vec<EpochRecord>,
}

/// Any map from raw feature vectors to denormalised outputs.
pub trait Forecaster {
    fn n_inputs(&self) -> usize;
    fn n_outputs(&self) -> usize;
    fn predict_into(&self, x: &[f64], out: &mut [f64]);

    /// Walks from `start` to `target`, switching the features in `order` one at a time.
    /// Writes `(order.len() + 1) * n_outputs` values: the output before any switch, then
    /// after each switch.
    fn evaluate_path(&self, start: &[f64], target: &[f64], order: &[usize], out: &mut [f64]) {
        let m = self.n_outputs();
        let mut state = start.to_vec();
        self.predict_into(&state, &mut out[..m]);
        for (k, &i) in order.iter().enumerate() {
            state[i] = target[i];
            self.predict_into(&state, &mut out[(k + 1) * m..(k + 2) * m]);
        }
    }
}

/// Adapter turning a closure into a [`Forecaster`].
pub struct FnForecaster<F> {
    pub n_inputs: usize,
    pub n_outputs: usize,
    pub f: F,
}

impl<F: Fn(&[f64], &mut [f64])> Forecaster for FnForecaster<F> {
    fn n_inputs(&self) -> usize {
        self.n_inputs
    }
    fn n_outputs(&self) -> usize {
        self.n_outputs
    }
    fn predict_into(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

/// Per-layer pre-activations and activations from one forward pass.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    /// `pre[l]` feeds layer `l`'s nonlinearity (or is the output for the last layer).
    pub pre: Vec<Vec<f64>>,
    /// `act[0]` is the input; `act[l + 1]` is the output of layer `l`.
    pub act: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn new(spec: &ModelSpec) -> Self {
        let sizes = &spec.layer_sizes;
        ForwardCache {
            pre: sizes[1..].iter().map(|&n| vec![0.0; n]).collect(),
            act: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn output(&self) -> &[f64] {
        self.act.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl TrainedModel {
    /// Untrained model: weights drawn by `spec.init` from `spec.seed`, zero biases, identity scalers.
    pub fn init(spec: ModelSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut layers = Vec::with_capacity(spec.layer_sizes.len() - 1);
        for w in spec.layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let mut layer = Layer::zeros(fan_out, fan_in);
            let (fi, fo) = (fan_in as f64, fan_out as f64);
            for v in layer.weights.iter_mut() {
                *v = match spec.init {
                    Init::GlorotUniform => uniform(&mut rng, libm::sqrt(6.0 / (fi + fo))),
                    Init::LecunUniform => uniform(&mut rng, libm::sqrt(3.0 / fi)),
                    Init::HeNormal => libm::sqrt(2.0 / fi) * math::standard_normal(&mut rng),
                    Init::LecunNormal => libm::sqrt(1.0 / fi) * math::standard_normal(&mut rng),
                };
            }
            layers.push(layer);
        }
        let input_scaler = ScalerParams::identity(spec.input_scaler, spec.n_inputs());
        let output_scaler = ScalerParams::identity(spec.output_scaler, spec.n_outputs());
        Ok(TrainedModel { spec, layers, input_scaler, output_scaler, history: Vec::new() })
    }

    /// Checks shapes and finiteness of every parameter.
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        let sizes = &self.spec.layer_sizes;
        if self.layers.len() != sizes.len() - 1 {
            return Err(Error::InvalidSpec(format!("{} layers for {} sizes", self.layers.len(), sizes.len())));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.cols != sizes[l]
                || layer.rows != sizes[l + 1]
                || layer.weights.len() != layer.rows * layer.cols
                || layer.bias.len() != layer.rows
            {
                return Err(Error::InvalidSpec(format!("layer {l} has inconsistent shape")));
            }
            if layer.weights.iter().chain(&layer.bias).any(|v| !v.is_finite()) {
                return Err(Error::InvalidSpec(format!("layer {l} has non-finite parameters")));
            }
        }
        let scalers_ok = self.input_scaler.n_cols() == self.spec.n_inputs()
            && self.input_scaler.scale.len() == self.spec.n_inputs()
            && self.output_scaler.n_cols() == self.spec.n_outputs()
            && self.output_scaler.scale.len() == self.spec.n_outputs();
        if !scalers_ok {
            return Err(Error::InvalidSpec("scaler width does not match layer sizes".to_string()));
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Inference-mode forward pass on normalised inputs, filling `cache`.
    pub fn forward_cached(&self, x_norm: &[f64], cache: &mut ForwardCache) {
        cache.act[0].copy_from_slice(x_norm);
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let (head, tail) = cache.act.split_at_mut(l + 1);
            layer.affine(&head[l], &mut cache.pre[l]);
            let out = &mut tail[0];
            if l == last {
                out.copy_from_slice(&cache.pre[l]);
            } else {
                for (o, &z) in out.iter_mut().zip(&cache.pre[l]) {
                    *o = self.spec.activation.apply(z);
                }
            }
        }
    }

    /// Normalised inputs to normalised outputs.
    pub fn forward(&self, x_norm: &[f64]) -> Result<Vec<f64>> {
        check_input(x_norm, self.spec.n_inputs())?;
        let mut cache = ForwardCache::new(&self.spec);
        self.forward_cached(x_norm, &mut cache);
        Ok(cache.output().to_vec())
    }

    pub fn normalise_input(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter().enumerate().map(|(i, &x)| self.input_scaler.transform_one(i, x)).collect()
    }

    /// Raw features to prices: input scaling, forward pass, output inverse scaling.
    pub fn predict_prices(&self, raw: &[f64]) -> Result<Vec<f64>> {
        check_input(raw, self.spec.n_inputs())?;
        let mut out = vec![0.0; self.spec.n_outputs()];
        self.predict_into(raw, &mut out);
        Ok(out)
    }

    /// Jacobian of denormalised outputs with respect to normalised inputs, row-major
    /// `n_outputs × n_inputs`, by reverse accumulation.
    pub fn jacobian(&self, raw: &[f64]) -> Result<Vec<f64>> {
        check_input(raw, self.spec.n_inputs())?;
        let x_norm = self.normalise_input(raw);
        Ok(self.jacobian_normalised(&x_norm))
    }

    pub fn jacobian_normalised(&self, x_norm: &[f64]) -> Vec<f64> {
        let mut cache = ForwardCache::new(&self.spec);
        self.forward_cached(x_norm, &mut cache);
        let n_out = self.spec.n_outputs();
        let last = self.layers.len() - 1;

        // G starts as diag(d inverse / dy) and is pulled back one layer at a time
        let mut g: Vec<f64> = vec![0.0; n_out * n_out];
        for j in 0..n_out {
            g[j * n_out + j] = self.output_scaler.inverse_derivative(j, cache.output()[j]);
        }
        let mut width = n_out;
        for l in (0..=last).rev() {
            let layer = &self.layers[l];
            if l != last {
                for j in 0..n_out {
                    for (k, gv) in g[j * width..(j + 1) * width].iter_mut().enumerate() {
                        *gv *= self.spec.activation.derivative(cache.pre[l][k]);
                    }
                }
            }
            let mut next = vec![0.0; n_out * layer.cols];
            for j in 0..n_out {
                let dst = &mut next[j * layer.cols..(j + 1) * layer.cols];
                for k in 0..layer.rows {
                    let gk = g[j * width + k];
                    if gk != 0.0 {
                        axpy(gk, layer.row(k), dst);
                    }
                }
            }
            g = next;
            width = layer.cols;
        }
        g
    }
}

fn uniform(rng: &mut ChaCha8Rng, bound: f64) -> f64 {
    (2.0 * rng.random::<f64>() - 1.0) * bound
}

fn check_input(x: &[f64], n: usize) -> Result<()> {
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    match x.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFiniteInput(i)),
        None => Ok(()),
    }
}

impl Forecaster for TrainedModel {
    fn n_inputs(&self) -> usize {
        self.spec.n_inputs()
    }

    fn n_outputs(&self) -> usize {
        self.spec.n_outputs()
    }

    fn predict_into(&self, x: &[f64], out: &mut [f64]) {
        let x_norm = self.normalise_input(x);
        let mut cache = ForwardCache::new(&self.spec);
        self.forward_cached(&x_norm, &mut cache);
        for (j, (o, &y)) in out.iter_mut().zip(cache.output()).enumerate() {
            *o = self.output_scaler.inverse_one(j, y);
        }
    }

    /// Updates the first layer's pre-activation incrementally per switched feature, then
    /// pushes all states of the walk through the remaining layers as one batch.
    fn evaluate_path(&self, start: &[f64], target: &[f64], order: &[usize], out: &mut [f64]) {
        let n_in = self.spec.n_inputs();
        let m = self.spec.n_outputs();
        let first = &self.layers[0];
        let h1 = first.rows;
        let states = order.len() + 1;
        let mut transposed = vec![0.0; first.weights.len()];
        for r in 0..h1 {
            for c in 0..n_in {
                transposed[c * h1 + r] = first.weights[r * n_in + c];
            }
        }
        let mut x_norm = self.normalise_input(start);
        let target_norm = self.normalise_input(target);

        let mut pre = vec![0.0; states * h1];
        first.affine(&x_norm, &mut pre[..h1]);
        for (k, &i) in order.iter().enumerate() {
            let (done, rest) = pre.split_at_mut((k + 1) * h1);
            let z = &mut rest[..h1];
            z.copy_from_slice(&done[k * h1..]);
            let delta = target_norm[i] - x_norm[i];
            if delta != 0.0 {
                axpy(delta, &transposed[i * h1..(i + 1) * h1], z);
                x_norm[i] = target_norm[i];
            }
        }

        let last = self.layers.len() - 1;
        for l in 0..=last {
            if l > 0 {
                let mut next = vec![0.0; states * self.layers[l].rows];
                self.layers[l].affine_many(&pre, &mut next);
                pre = next;
            }
            if l < last {
                pre.iter_mut().for_each(|z| *z = self.spec.activation.apply(*z));
            }
        }
        for (k, row) in pre.chunks_exact(m).enumerate() {
            for (j, &y) in row.iter().enumerate() {
                out[k * m + j] = self.output_scaler.inverse_one(j, y);
            }
        }
    }
}

impl Layer {
    /// [`Layer::affine`] applied to stacked inputs (`xs` is `k × cols`, `out` is `k × rows`).
    /// Blocks of four inputs share each weight row; results match `affine` bit for bit.
    pub fn affine_many(&self, xs: &[f64], out: &mut [f64]) {
        let k = xs.len() / self.cols;
        let mut s = 0;
        while s + 4 <= k {
            let x = |i: usize| &xs[(s + i) * self.cols..(s + i + 1) * self.cols];
            let (x0, x1, x2, x3) = (x(0), x(1), x(2), x(3));
            for r in 0..self.rows {
                let d = dot4(self.row(r), [x0, x1, x2, x3]);
                for (i, v) in d.iter().enumerate() {
                    out[(s + i) * self.rows + r] = self.bias[r] + v;
                }
            }
            s += 4;
        }
        for t in s..k {
            self.affine(&xs[t * self.cols..(t + 1) * self.cols], &mut out[t * self.rows..(t + 1) * self.rows]);
        }
    }
}

/// Four [`dot`] products against one shared left operand, each in `dot`'s summation order.
#[inline]
fn dot4(a: &[f64], b: [&[f64]; 4]) -> [f64; 4] {
    let n = a.len();
    let mut acc = [[0.0f64; 4]; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let k = 4 * c;
        let w = [a[k], a[k + 1], a[k + 2], a[k + 3]];
        for (acc_s, bs) in acc.iter_mut().zip(&b) {
            acc_s[0] += w[0] * bs[k];
            acc_s[1] += w[1] * bs[k + 1];
            acc_s[2] += w[2] * bs[k + 2];
            acc_s[3] += w[3] * bs[k + 3];
        }
    }
    let mut out = [0.0; 4];
    for (o, (acc_s, bs)) in out.iter_mut().zip(acc.iter().zip(&b)) {
        let mut s = (acc_s[0] + acc_s[1]) + (acc_s[2] + acc_s[3]);
        for k in 4 * chunks..n {
            s += a[k] * bs[k];
        }
        *o = s;
    }
    out
}
