#![allow(dead_code)]

use epfx_core::attribution::{AttributionKind, AttributionTensor};
use epfx_core::{Activation, Day, FeatureId, Init, ModelSpec, ScalerKind, ScalerParams, TrainedModel};

/// Small network with non-trivial scalers and biases.
pub fn small_model(sizes: &[usize], activation: Activation, output_scaler: ScalerKind, seed: u64) -> TrainedModel {
    let spec = ModelSpec {
        layer_sizes: sizes.to_vec(),
        activation,
        dropout_rate: 0.0,
        l1_factor: 0.0,
        init: Init::HeNormal,
        input_scaler: ScalerKind::Std,
        output_scaler,
        seed,
    };
    let mut m = TrainedModel::init(spec).unwrap();
    let n_in = sizes[0];
    let n_out = *sizes.last().unwrap();
    m.input_scaler = ScalerParams {
        kind: ScalerKind::Std,
        location: (0..n_in).map(|i| i as f64).collect(),
        scale: (0..n_in).map(|i| 1.0 + 0.5 * i as f64).collect(),
    };
    m.output_scaler = ScalerParams { kind: output_scaler, location: vec![40.0; n_out], scale: vec![8.0; n_out] };
    for (l, layer) in m.layers.iter_mut().enumerate() {
        for (k, b) in layer.bias.iter_mut().enumerate() {
            *b = 0.1 * ((k + 3 * l) as f64).sin();
        }
    }
    m
}

/// Hourly blocks `B0 H0..H23`, `B1 H0..H23`, ...
pub fn block_features(blocks: usize) -> Vec<FeatureId> {
    (0..blocks).flat_map(|b| (0..24u8).map(move |h| FeatureId::hourly(&format!("B{b}"), h))).collect()
}

pub fn shap_tensor(features: Vec<FeatureId>, n_outputs: usize, values: Vec<f64>, baseline: Vec<f64>) -> AttributionTensor {
    let n_inst = baseline.len() / n_outputs;
    AttributionTensor {
        kind: AttributionKind::Shap,
        instances: (0..n_inst as i32).map(Day).collect(),
        features,
        n_outputs,
        values,
        baseline,
    }
}
