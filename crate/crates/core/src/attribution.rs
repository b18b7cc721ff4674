//! Per-instance explanations: Jacobians, Monte-Carlo permutation Shapley values and an
//! exact enumeration reference.
//!
//! Shapley values use the interventional value function
//! `v(S) = E_z[m(x_S, z_{S̄})]` with `z` drawn from a background set of training rows.
//! The Monte-Carlo estimator samples a (permutation, background row) pair, walks the
//! permutation switching one feature of `z` to its value in `x` at a time, and credits
//! each feature with the resulting change in the (denormalised) output. Every walk
//! telescopes to `m(x) − m(z)`, so the estimate satisfies efficiency for any sample size.

use alloc::vec;
use alloc::vec::Vec;
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::features::FeatureMatrix;
use crate::market::FeatureId;
use crate::math::sub_seed;
use crate::mlp::{Forecaster, TrainedModel};
use crate::series::Day;
use crate::{Error, Result};

/// Largest feature count accepted by [`shap_exact`].
pub const EXACT_MAX_FEATURES: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AttributionKind {
    Shap,
    Gradient,
}

/// Values laid out `[instance][output][feature]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionTensor {
    pub kind: AttributionKind,
    pub instances: Vec<Day>,
    pub features: Vec<FeatureId>,
    pub n_outputs: usize,
    pub values: Vec<f64>,
    /// Per-output `E(m(X))` for each instance, `[instance][output]`; empty for gradients.
    pub baseline: Vec<f64>,
}

impl AttributionTensor {
    pub fn empty(kind: AttributionKind, features: Vec<FeatureId>, n_outputs: usize) -> Self {
        AttributionTensor { kind, instances: Vec::new(), features, n_outputs, values: Vec::new(), baseline: Vec::new() }
    }

    pub fn n_instances(&self) -> usize {
        self.instances.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    /// `n_outputs × n_features` slice of one instance.
    pub fn instance(&self, i: usize) -> &[f64] {
        let block = self.n_outputs * self.n_features();
        &self.values[i * block..(i + 1) * block]
    }

    #[inline]
    pub fn get(&self, instance: usize, output: usize, feature: usize) -> f64 {
        let nf = self.n_features();
        self.values[(instance * self.n_outputs + output) * nf + feature]
    }

    pub fn instance_baseline(&self, i: usize) -> &[f64] {
        &self.baseline[i * self.n_outputs..(i + 1) * self.n_outputs]
    }

    /// Per-output baseline averaged over instances.
    pub fn mean_baseline(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_outputs];
        let n = self.n_instances();
        if n == 0 || self.baseline.is_empty() {
            return out;
        }
        for i in 0..n {
            for (o, b) in out.iter_mut().zip(self.instance_baseline(i)) {
                *o += b;
            }
        }
        out.iter_mut().for_each(|o| *o /= n as f64);
        out
    }
}

/// Raw feature rows used to fill in "absent" features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundSet {
    pub n_features: usize,
    pub rows: Vec<f64>,
}

impl BackgroundSet {
    pub fn new(n_features: usize, rows: Vec<f64>) -> Result<Self> {
        if n_features == 0 || !rows.len().is_multiple_of(n_features) {
            return Err(Error::DimensionMismatch { expected: n_features, got: rows.len() });
        }
        if rows.is_empty() {
            return Err(Error::EmptyBackground);
        }
        Ok(BackgroundSet { n_features, rows })
    }

    /// Up to `size` distinct training rows chosen uniformly at random.
    pub fn sample(features: &FeatureMatrix, size: usize, seed: u64) -> Result<Self> {
        let n = features.n_instances();
        if n == 0 || size == 0 {
            return Err(Error::EmptyBackground);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picks = index::sample(&mut rng, n, size.min(n)).into_vec();
        picks.sort_unstable();
        let mut rows = Vec::with_capacity(picks.len() * features.n_features());
        for p in picks {
            rows.extend_from_slice(features.row(p));
        }
        BackgroundSet::new(features.n_features(), rows)
    }

    pub fn len(&self) -> usize {
        self.rows.len() / self.n_features
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.n_features..(i + 1) * self.n_features]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapConfig {
    /// Number of (permutation, background row) pairs.
    pub n_pairs: usize,
    /// Also walk each sampled permutation in reverse with the same background row.
    pub antithetic: bool,
}

impl Default for ShapConfig {
    fn default() -> Self {
        ShapConfig { n_pairs: 64, antithetic: true }
    }
}

/// Shapley values for one instance, `[output][feature]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapEstimate {
    pub n_outputs: usize,
    pub n_features: usize,
    pub values: Vec<f64>,
    pub baseline: Vec<f64>,
    /// Standard error of each value over sampled pairs (NaN with a single pair, zero for exact values).
    pub std_err: Vec<f64>,
}

impl ShapEstimate {
    #[inline]
    pub fn get(&self, output: usize, feature: usize) -> f64 {
        self.values[output * self.n_features + feature]
    }

    pub fn output_sum(&self, output: usize) -> f64 {
        self.values[output * self.n_features..(output + 1) * self.n_features].iter().sum()
    }
}

fn check_shapes<F: Forecaster + ?Sized>(model: &F, x: &[f64], background: &BackgroundSet) -> Result<()> {
    if background.is_empty() {
        return Err(Error::EmptyBackground);
    }
    if x.len() != model.n_inputs() {
        return Err(Error::DimensionMismatch { expected: model.n_inputs(), got: x.len() });
    }
    if background.n_features != model.n_inputs() {
        return Err(Error::DimensionMismatch { expected: model.n_inputs(), got: background.n_features });
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput(i));
    }
    Ok(())
}

/// Monte-Carlo permutation estimate of Shapley values on denormalised outputs.
pub fn shap_mc<F: Forecaster + ?Sized>(
    model: &F,
    x: &[f64],
    background: &BackgroundSet,
    config: ShapConfig,
    seed: u64,
) -> Result<ShapEstimate> {
    check_shapes(model, x, background)?;
    if config.n_pairs == 0 {
        return Err(Error::InvalidArgument("n_pairs must be >= 1".into()));
    }
    let n = model.n_inputs();
    let m = model.n_outputs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut path = vec![0.0; (n + 1) * m];
    let mut sample = vec![0.0; m * n];
    let mut sum = vec![0.0; m * n];
    let mut sum_sq = vec![0.0; m * n];
    let mut baseline = vec![0.0; m];
    let walks = if config.antithetic { 2 } else { 1 };

    for _ in 0..config.n_pairs {
        order.shuffle(&mut rng);
        let z = background.row(rng.random_range(0..background.len()));
        sample.fill(0.0);
        for w in 0..walks {
            if w == 1 {
                order.reverse();
            }
            model.evaluate_path(z, x, &order, &mut path);
            if path.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteModelOutput);
            }
            for (b, &v) in baseline.iter_mut().zip(&path[..m]) {
                *b += v;
            }
            for (k, &feature) in order.iter().enumerate() {
                for j in 0..m {
                    sample[j * n + feature] += path[(k + 1) * m + j] - path[k * m + j];
                }
            }
        }
        let inv = 1.0 / walks as f64;
        for ((s, s2), &v) in sum.iter_mut().zip(sum_sq.iter_mut()).zip(&sample) {
            let v = v * inv;
            *s += v;
            *s2 += v * v;
        }
    }

    let pairs = config.n_pairs as f64;
    let values: Vec<f64> = sum.iter().map(|s| s / pairs).collect();
    let std_err = sum
        .iter()
        .zip(&sum_sq)
        .map(|(s, s2)| {
            if config.n_pairs < 2 {
                return f64::NAN;
            }
            let mean = s / pairs;
            let var = ((s2 - pairs * mean * mean) / (pairs - 1.0)).max(0.0);
            libm::sqrt(var / pairs)
        })
        .collect();
    baseline.iter_mut().for_each(|b| *b /= pairs * walks as f64);
    Ok(ShapEstimate { n_outputs: m, n_features: n, values, baseline, std_err })
}

/// Exact Shapley values by enumerating every coalition; feasible for at most
/// [`EXACT_MAX_FEATURES`] features.
pub fn shap_exact<F: Forecaster + ?Sized>(model: &F, x: &[f64], background: &BackgroundSet) -> Result<ShapEstimate> {
    check_shapes(model, x, background)?;
    let n = model.n_inputs();
    if n > EXACT_MAX_FEATURES {
        return Err(Error::TooManyFeatures { max: EXACT_MAX_FEATURES, got: n });
    }
    let m = model.n_outputs();
    let coalitions = 1usize << n;
    let mut value = vec![0.0; coalitions * m];
    let mut state = vec![0.0; n];
    let mut out = vec![0.0; m];
    let b = background.len() as f64;
    for mask in 0..coalitions {
        let v = &mut value[mask * m..(mask + 1) * m];
        for r in 0..background.len() {
            let z = background.row(r);
            for i in 0..n {
                state[i] = if mask >> i & 1 == 1 { x[i] } else { z[i] };
            }
            model.predict_into(&state, &mut out);
            for (acc, &o) in v.iter_mut().zip(&out) {
                *acc += o;
            }
        }
        v.iter_mut().for_each(|a| *a /= b);
        if v.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFiniteModelOutput);
        }
    }

    // weight for a coalition of size s not containing i: s!(n-s-1)!/n!
    let mut fact = vec![1.0f64; n + 1];
    for k in 1..=n {
        fact[k] = fact[k - 1] * k as f64;
    }
    let weight: Vec<f64> = (0..n).map(|s| fact[s] * fact[n - s - 1] / fact[n]).collect();

    let mut values = vec![0.0; m * n];
    for i in 0..n {
        let bit = 1usize << i;
        for mask in (0..coalitions).filter(|s| s & bit == 0) {
            let w = weight[mask.count_ones() as usize];
            for j in 0..m {
                values[j * n + i] += w * (value[(mask | bit) * m + j] - value[mask * m + j]);
            }
        }
    }
    Ok(ShapEstimate { n_outputs: m, n_features: n, values, baseline: value[..m].to_vec(), std_err: vec![0.0; m * n] })
}

/// Jacobian of denormalised outputs with respect to normalised inputs (`n_outputs × n_inputs`).
pub fn jacobian(model: &TrainedModel, raw_features: &[f64]) -> Result<Vec<f64>> {
    model.jacobian(raw_features)
}

/// Shapley and gradient attributions of the instance at `position` (which seeds its RNG stream).
pub fn explain_instance(
    model: &TrainedModel,
    features: &FeatureMatrix,
    position: usize,
    background: &BackgroundSet,
    config: ShapConfig,
    seed: u64,
) -> Result<(ShapEstimate, Vec<f64>)> {
    let x = features.row(position);
    let shap = shap_mc(model, x, background, config, sub_seed(seed, position as u64))?;
    let grad = model.jacobian(x)?;
    Ok((shap, grad))
}

/// Assembles per-instance results (in the order of `positions`) into tensors.
pub fn assemble(
    features: &FeatureMatrix,
    n_outputs: usize,
    positions: &[usize],
    results: Vec<(ShapEstimate, Vec<f64>)>,
) -> (AttributionTensor, AttributionTensor) {
    let mut shap = AttributionTensor::empty(AttributionKind::Shap, features.columns.clone(), n_outputs);
    let mut grad = AttributionTensor::empty(AttributionKind::Gradient, features.columns.clone(), n_outputs);
    for (&p, (s, g)) in positions.iter().zip(results) {
        shap.instances.push(features.instances[p]);
        grad.instances.push(features.instances[p]);
        shap.values.extend(s.values);
        shap.baseline.extend(s.baseline);
        grad.values.extend(g);
    }
    (shap, grad)
}

/// Explains the selected instances sequentially. Results depend only on `seed` and the
/// instance positions, never on evaluation order.
pub fn explain_dataset(
    model: &TrainedModel,
    features: &FeatureMatrix,
    positions: &[usize],
    background: &BackgroundSet,
    config: ShapConfig,
    seed: u64,
) -> Result<(AttributionTensor, AttributionTensor)> {
    let results = positions
        .iter()
        .map(|&p| explain_instance(model, features, p, background, config, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(features, model.spec.n_outputs(), positions, results))
}
